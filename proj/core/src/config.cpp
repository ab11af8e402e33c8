// Copyright 2026 The dpcpsf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dpcpsf/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace dpcpsf {

using json = nlohmann::ordered_json;

template <int N>
void to_json(json& j, const BoxN<N>& b) {
  j = json{{"lo", b.lo}, {"hi", b.hi}};
}
template <int N>
void from_json(const json& j, BoxN<N>& b) {
  j.at("lo").get_to(b.lo);
  j.at("hi").get_to(b.hi);
}

void to_json(json& j, const CylinderConstraint& c) {
  j = json{{"x", c.x}, {"y", c.y}, {"radius", c.radius}};
}
void from_json(const json& j, CylinderConstraint& c) {
  j.at("x").get_to(c.x);
  j.at("y").get_to(c.y);
  j.at("radius").get_to(c.radius);
}

namespace dpc {
void to_json(json& j, const TaskAnchor& a) { j = json{{"start", a.start}, {"goal", a.goal}}; }
void from_json(const json& j, TaskAnchor& a) {
  j.at("start").get_to(a.start);
  j.at("goal").get_to(a.goal);
}
}  // namespace dpc

namespace config {
namespace {

// Walks a config struct in both directions so each field is named once.
class Writer {
 public:
  static constexpr bool kReading = false;
  explicit Writer(json& j) : j_(j) {}

  template <class T>
  void operator()(const char* key, T& v) {
    j_[key] = v;
  }
  template <class F>
  void object(const char* key, F&& f) {
    json sub = json::object();
    Writer w(sub);
    f(w);
    j_[key] = std::move(sub);
  }

 private:
  json& j_;
};

class Reader {
 public:
  static constexpr bool kReading = true;
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("unknown config key " + where(item.key()));
    }
  }

  template <class T>
  void operator()(const char* key, T& v) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      j_.at(key).get_to(v);
    } catch (const json::exception& e) {
      throw ConfigError("bad value for " + where(key) + ": " + e.what());
    }
  }
  template <class F>
  void object(const char* key, F&& f) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    Reader r(j_.at(key), where(key));
    f(r);
  }

 private:
  std::string where(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class IO>
void visit(IO& io, optim::LbfgsConfig& c) {
  io("max_iter", c.max_iter);
  io("grad_tol", c.grad_tol);
  io("memory", c.memory);
  io("armijo", c.armijo);
  io("backtrack", c.backtrack);
  io("max_backtracks", c.max_backtracks);
}

template <class IO>
void visit(IO& io, dpc::TrainConfig& c) {
  io("seed", c.seed);
  io("batches", c.batches);
  io("rollouts_per_batch", c.rollouts_per_batch);
  io("steps_per_rollout", c.steps_per_rollout);
  io("dt", c.dt);
  io("learning_rate", c.learning_rate);
  io("lr_decay", c.lr_decay);
  io("momentum", c.momentum);
  io("rms_decay", c.rms_decay);
  io("rms_epsilon", c.rms_epsilon);
  io("grad_tolerance", c.grad_tolerance);
  io("max_retries", c.max_retries);
  io.object("policy", [&](auto& p) {
    p("hidden", c.policy.hidden);
    p("state_scale", c.policy.state_scale);
    p("accel_box", c.policy.accel_box);
  });
  io.object("loss", [&](auto& l) {
    l("q", c.loss.q);
    l("r", c.loss.r);
    l("state_box", c.loss.state_box);
    l("input_box", c.loss.input_box);
    l("state_penalty", c.loss.state_penalty);
    l("input_penalty", c.loss.input_penalty);
    l("cylinder_penalty", c.loss.cylinder_penalty);
    l("cylinder_inflation", c.loss.cylinder_inflation);
    l("terminal_weight", c.loss.terminal_weight);
    l("cylinders", c.loss.cylinders);
  });
  io.object("sampling", [&](auto& s) {
    s("initial", c.sampling.initial);
    s("static_fraction", c.sampling.static_fraction);
    s("max_reference_speed", c.sampling.max_reference_speed);
    s("cylinder_clearance", c.sampling.cylinder_clearance);
    s("clear_approach", c.sampling.clear_approach);
    s("anchors", c.sampling.anchors);
    s("anchor_fraction", c.sampling.anchor_fraction);
    s("anchor_jitter", c.sampling.anchor_jitter);
    s("anchor_speed", c.sampling.anchor_speed);
  });
}

template <class IO>
void visit(IO& io, psf::PSFConfig& c) {
  double first = c.schedule.first_step;
  double horizon = c.schedule.horizon;
  int steps = c.schedule.steps;
  io("first_step", first);
  io("horizon", horizon);
  io("steps", steps);
  if constexpr (IO::kReading) {
    try {
      c.schedule = psf::make_schedule(first, horizon, steps);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("psf schedule: ") + e.what());
    }
  }
  io("alpha", c.default_alpha);
  io("margin", c.default_margin);
  io("set_alpha", c.alpha);
  io("set_margin", c.margin);
  io("input_box", c.input_box);
  io("literal_sum", c.literal_sum);
  io("warm_start", c.warm_start);
  io.object("solver", [&](auto& s) { visit(s, c.solver); });
}

template <class IO>
void visit(IO& io, mpc::MPCConfig& c) {
  std::string kind = c.schedule == mpc::ScheduleKind::kLinear ? "linear" : "constant";
  io("schedule", kind);
  if constexpr (IO::kReading) {
    if (kind == "linear") {
      c.schedule = mpc::ScheduleKind::kLinear;
    } else if (kind == "constant") {
      c.schedule = mpc::ScheduleKind::kConstant;
    } else {
      throw ConfigError("mpc schedule must be 'constant' or 'linear', got '" + kind + "'");
    }
  }
  io("horizon", c.horizon);
  io("steps", c.steps);
  io("first_step", c.first_step);
  io("cylinder_slope", c.cylinder_slope);
  io("cylinder_penalty", c.cylinder_penalty);
  io("warm_start", c.warm_start);
  io("input_about_hover", c.input_about_hover);
  io.object("solver", [&](auto& s) { visit(s, c.solver); });
}

template <class IO>
void visit(IO& io, dynamics::QuadParams& p) {
  io("mass", p.mass);
  io("inertia", p.inertia);
  io("arm_length", p.arm_length);
  io("thrust_coefficient", p.thrust_coefficient);
  io("torque_coefficient", p.torque_coefficient);
  io("rotor_time_constant", p.rotor_time_constant);
  io("max_rotor_speed", p.max_rotor_speed);
  io("linear_drag", p.linear_drag);
  io("gravity", p.gravity);
  io("rotor_speed_lo", p.rotor_speed_lo);
  io("rotor_speed_hi", p.rotor_speed_hi);
  io("input_lo", p.input_lo);
  io("input_hi", p.input_hi);
}

template <class IO>
void visit(IO& io, Config& c) {
  io.object("train", [&](auto& t) { visit(t, c.train); });
  io.object("safeset", [&](auto& s) {
    s("eps_conv", c.eps_conv);
    s("robustness", c.safeset.robustness);
    s("max_points", c.safeset.max_points);
    s("prune", c.safeset.prune);
    s("seed", c.safeset.seed);
  });
  io.object("psf", [&](auto& p) { visit(p, c.run.psf); });
  io.object("nmpc", [&](auto& m) { visit(m, c.run.nmpc); });
  io.object("vtnmpc", [&](auto& m) { visit(m, c.run.vtnmpc); });
  io.object("mpc_weights", [&](auto& w) {
    w("q", c.run.weights.q);
    w("r", c.run.weights.r);
  });
  io.object("run", [&](auto& r) {
    r("control_period", c.run.control_period);
    r("plant_step", c.run.plant_step);
    r("perturbation", c.run.perturbation);
    r("divergence_radius", c.run.divergence_radius);
    r.object("model", [&](auto& m) { visit(m, c.run.model); });
    if constexpr (std::decay_t<decltype(r)>::kReading) {
      c.run.gains = dynamics::default_gains(c.run.model);
    }
    r.object("gains", [&](auto& g) {
      g("attitude", c.run.gains.attitude);
      g("rate", c.run.gains.rate);
      g("yaw_setpoint", c.run.gains.yaw_setpoint);
    });
  });
}

}  // namespace

void Config::validate() const {
  train.validate();
  if (!(eps_conv > 0.0)) throw ConfigError("safeset.eps_conv must be > 0");
  if (!(safeset.robustness >= 0.0)) throw ConfigError("safeset.robustness must be >= 0");
  if (safeset.max_points < 1) throw ConfigError("safeset.max_points must be >= 1");
  run.validate();
}

Config default_config() {
  Config c;
  const CylinderConstraint cyl = bench::navigation(c.run.model).obstacles.at(0);
  c.train.loss.cylinders = {cyl};
  c.train.sampling.anchors = {dpc::TaskAnchor{{-2.0, 0.0, 1.0}, {2.0, 0.0, 1.0}}};
  return c;
}

Config parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (j.contains("schema") && j.at("schema") != "dpcpsf.config/v1") {
    throw ConfigError("unsupported config schema " + j.at("schema").dump());
  }
  j.erase("schema");
  Config c = default_config();
  {
    Reader r(j, "");
    visit(r, c);
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string dump_config(const Config& c) {
  json j = json::object();
  j["schema"] = "dpcpsf.config/v1";
  Config copy = c;
  Writer w(j);
  visit(w, copy);
  return j.dump(2) + "\n";
}

void save_config(const Config& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config " + path);
  out << dump_config(c);
  if (!out) throw ConfigError("write failed: " + path);
}

}  // namespace config
}  // namespace dpcpsf
