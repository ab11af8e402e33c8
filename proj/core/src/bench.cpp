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

#include "dpcpsf/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dpcpsf::bench {

namespace fs = std::filesystem;
using json = nlohmann::json;

const char* task_name(Task t) {
  switch (t) {
    case Task::kNavigation: return "nav";
    case Task::kTrajectory: return "traj";
    case Task::kAdversarial: return "adv";
  }
  return "?";
}

const char* controller_name(ControllerKind c) {
  switch (c) {
    case ControllerKind::kDpc: return "dpc";
    case ControllerKind::kDpcPsf: return "dpc-psf";
    case ControllerKind::kVtnmpc: return "vtnmpc";
    case ControllerKind::kNmpc: return "nmpc";
  }
  return "?";
}

Task parse_task(const std::string& s) {
  for (Task t : {Task::kNavigation, Task::kTrajectory, Task::kAdversarial}) {
    if (s == task_name(t)) return t;
  }
  throw std::invalid_argument("unknown task '" + s + "'");
}

ControllerKind parse_controller(const std::string& s) {
  for (ControllerKind c : {ControllerKind::kDpc, ControllerKind::kDpcPsf, ControllerKind::kVtnmpc,
                           ControllerKind::kNmpc}) {
    if (s == controller_name(c)) return c;
  }
  throw std::invalid_argument("unknown controller '" + s + "'");
}

void Scenario::validate() const {
  if (!(duration > 0.0)) throw std::invalid_argument("Scenario: duration must be > 0");
  if (waypoints.empty()) throw std::invalid_argument("Scenario: no waypoints");
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    if (!(waypoints[i].t > waypoints[i - 1].t)) {
      throw std::invalid_argument("Scenario: waypoint times must be strictly increasing");
    }
  }
  for (const auto& c : obstacles) c.validate();
}

namespace {

const CylinderConstraint kCylinder{0.0, 0.2, 0.5};

}  // namespace

Scenario navigation(const dynamics::QuadParams& p) {
  Scenario s;
  s.kind = Task::kNavigation;
  s.duration = 5.0;
  s.initial = dynamics::hover_state(p, -2.0, 0.0, 1.0);
  s.obstacles = {kCylinder};
  s.waypoints = {{0.0, {2.0, 0.0, 1.0}}};
  return s;
}

Scenario adversarial(const dynamics::QuadParams& p, double speed) {
  Scenario s = navigation(p);
  s.kind = Task::kAdversarial;
  s.duration = 10.0;
  const double dx = kCylinder.x - s.initial[dynamics::kX];
  const double dy = kCylinder.y - s.initial[dynamics::kY];
  const double d = std::hypot(dx, dy);
  s.initial[dynamics::kVx] = speed * dx / d;
  s.initial[dynamics::kVy] = speed * dy / d;
  return s;
}

Scenario trajectory(const dynamics::QuadParams& p, double duration) {
  Scenario s;
  s.kind = Task::kTrajectory;
  s.duration = duration;
  s.initial = dynamics::hover_state(p, -2.0, -1.5, 1.0);
  s.obstacles = {kCylinder};
  const double q = duration / 4.0;
  s.waypoints = {{0.0, {-2.0, -1.5, 1.0}},
                 {q, {2.0, -1.5, 1.0}},
                 {2 * q, {2.0, 1.5, 1.0}},
                 {3 * q, {-2.0, 1.5, 1.0}},
                 {4 * q, {-2.0, -1.5, 1.0}}};
  s.dpc_offset = 0.5;
  return s;
}

Scenario make_scenario(Task t, const dynamics::QuadParams& p) {
  switch (t) {
    case Task::kNavigation: return navigation(p);
    case Task::kTrajectory: return trajectory(p);
    case Task::kAdversarial: return adversarial(p);
  }
  throw std::invalid_argument("make_scenario: unknown task");
}

Sub1State waypoint_reference(double t, const std::vector<Waypoint>& wp) {
  if (wp.empty()) throw std::invalid_argument("waypoint_reference: no waypoints");
  auto at_rest = [](const Waypoint& w) {
    return Sub1State{w.pos[0], w.pos[1], w.pos[2], 0.0, 0.0, 0.0};
  };
  if (t <= wp.front().t) return at_rest(wp.front());
  if (t >= wp.back().t) return at_rest(wp.back());
  const auto it = std::upper_bound(wp.begin(), wp.end(), t,
                                   [](double v, const Waypoint& w) { return v < w.t; });
  const Waypoint& b = *it;
  const Waypoint& a = *(it - 1);
  const double span = b.t - a.t;
  const double s = (t - a.t) / span;
  Sub1State r{};
  for (int i = 0; i < 3; ++i) {
    r[i] = a.pos[i] + s * (b.pos[i] - a.pos[i]);
    r[3 + i] = (b.pos[i] - a.pos[i]) / span;
  }
  return r;
}

void RunConfig::validate() const {
  if (!(control_period > 0.0)) throw std::invalid_argument("RunConfig: control_period must be > 0");
  if (!(plant_step > 0.0) || plant_step > control_period) {
    throw std::invalid_argument("RunConfig: plant_step must be in (0, control_period]");
  }
  const double ratio = control_period / plant_step;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
    throw std::invalid_argument("RunConfig: control_period must be a multiple of plant_step");
  }
  model.validate();
  gains.validate();
  psf.validate();
  nmpc.validate();
  vtnmpc.validate();
  weights.validate();
}

namespace {

QuadState full_reference(const Sub1State& r, const dynamics::QuadParams& p) {
  QuadState x = dynamics::hover_state(p, r[0], r[1], r[2]);
  x[dynamics::kVx] = r[3];
  x[dynamics::kVy] = r[4];
  x[dynamics::kVz] = r[5];
  return x;
}

bool finite_state(const QuadState& x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

double min_clearance(const QuadState& x, const std::vector<CylinderConstraint>& cyl) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& c : cyl) m = std::min(m, c.clearance(x[dynamics::kX], x[dynamics::kY]));
  return m;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

}  // namespace

RunMetrics run_scenario(const Scenario& sc, ControllerKind kind, const RunConfig& cfg,
                        const Artifacts& art, std::uint64_t seed) {
  sc.validate();
  cfg.validate();
  const bool uses_dpc = kind == ControllerKind::kDpc || kind == ControllerKind::kDpcPsf;
  if (uses_dpc && !art.policy) throw std::invalid_argument("run_scenario: DPC policy required");
  if (kind == ControllerKind::kDpcPsf && !art.safe_set) {
    throw std::invalid_argument("run_scenario: safe set required for dpc-psf");
  }

  const dynamics::QuadParams plant = dynamics::perturbed_plant(cfg.model, seed, cfg.perturbation);
  std::optional<psf::SafetyFilter> filter;
  if (kind == ControllerKind::kDpcPsf) filter.emplace(*art.policy, *art.safe_set, cfg.psf);
  std::optional<mpc::MPCController> mpc_ctl;
  if (kind == ControllerKind::kNmpc || kind == ControllerKind::kVtnmpc) {
    mpc::MPCConfig mc = kind == ControllerKind::kNmpc ? cfg.nmpc : cfg.vtnmpc;
    mc.model = cfg.model;
    mc.cylinders = sc.obstacles;
    mpc_ctl.emplace(std::move(mc), cfg.weights);
  }
  const mpc::Reference mpc_ref = [&](double t) {
    return full_reference(waypoint_reference(t, sc.waypoints), cfg.model);
  };

  RunMetrics m;
  m.task = sc.kind;
  m.controller = kind;
  m.seed = seed;
  const int steps = static_cast<int>(std::floor(sc.duration / cfg.control_period + 1e-9));
  const int substeps = static_cast<int>(std::lround(cfg.control_period / cfg.plant_step));
  QuadState x = sc.initial;
  double clearance = min_clearance(x, sc.obstacles);
  std::vector<double> times;
  std::vector<QuadState> xs;
  std::vector<QuadInput> us;
  std::vector<QuadState> refs;

  for (int k = 0; k < steps; ++k) {
    const double t = k * cfg.control_period;
    StepLog row;
    row.t = t;
    row.x = x;
    row.ref = waypoint_reference(t, sc.waypoints);
    const Sub1State s1 = dynamics::sub1_of(x);

    const auto t0 = std::chrono::steady_clock::now();
    std::optional<Sub1Input> accel;
    QuadInput motor{};
    if (kind == ControllerKind::kDpc) {
      accel = dpc::policy_eval(*art.policy, s1, waypoint_reference(t + sc.dpc_offset, sc.waypoints));
    } else if (kind == ControllerKind::kDpcPsf) {
      const psf::FilterResult r =
          filter->step(s1, waypoint_reference(t + sc.dpc_offset, sc.waypoints));
      accel = r.u;
      row.triggered = r.triggered;
      row.objective = r.objective;
      row.iterations = r.iterations;
      row.warning = r.warning;
    } else {
      const mpc::OCPSolution s = mpc_ctl->step(x, mpc_ref, t);
      motor = s.inputs.front();
      row.objective = s.objective;
      row.iterations = s.iterations;
      row.warning = s.warning;
    }
    const double us_elapsed =
        std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count();
    row.solve_us = us_elapsed;
    times.push_back(us_elapsed);
    if (row.triggered) ++m.triggers;

    for (int j = 0; j < substeps; ++j) {
      QuadInput u = motor;
      if (accel) u = dynamics::cascade_p(*accel, x, cfg.gains, cfg.model).input;
      if (j == 0) row.u = u;
      x = dynamics::euler_step(x, u, cfg.plant_step, plant);
      clearance = std::min(clearance, min_clearance(x, sc.obstacles));
    }
    if (accel) row.accel = *accel;
    m.log.push_back(row);
    xs.push_back(row.x);
    us.push_back(row.u);
    refs.push_back(full_reference(row.ref, cfg.model));

    const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    if (!finite_state(x) || r > cfg.divergence_radius) {
      m.diverged = true;
      break;
    }
  }

  m.steps = static_cast<int>(m.log.size());
  m.trigger_fraction = m.steps ? double(m.triggers) / m.steps : 0.0;
  m.min_clearance = std::isfinite(clearance) ? clearance : 0.0;
  if (sc.obstacles.empty()) m.min_clearance = 0.0;
  m.cost = mpc::accumulate_task_cost(xs, us, refs, sc.obstacles, cfg.weights);
  if (clearance < 0.0 || m.diverged) m.cost = std::numeric_limits<double>::infinity();
  for (double v : times) m.controller_time_total_s += v * 1e-6;
  m.controller_time_median_us = median(times);
  const Waypoint& goal = sc.waypoints.back();
  m.final_error = std::sqrt(std::pow(x[0] - goal.pos[0], 2) + std::pow(x[1] - goal.pos[1], 2) +
                            std::pow(x[2] - goal.pos[2], 2));
  return m;
}

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols = [] {
    std::vector<std::string> c{"t", "x", "y", "z", "q0", "q1", "q2", "q3", "vx", "vy",
                               "vz", "p", "q", "r", "w1", "w2", "w3", "w4", "u1", "u2",
                               "u3", "u4", "ref_x", "ref_y", "ref_z", "ref_vx", "ref_vy",
                               "ref_vz", "ax", "ay", "az", "triggered", "objective",
                               "iterations", "solve_us", "warning"};
    return c;
  }();
  return cols;
}

void write_run_csv(const RunMetrics& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n' << std::setprecision(10);
  for (const StepLog& r : m.log) {
    out << r.t;
    for (double v : r.x) out << ',' << v;
    for (double v : r.u) out << ',' << v;
    for (double v : r.ref) out << ',' << v;
    for (double v : r.accel) out << ',' << v;
    out << ',' << int(r.triggered) << ',' << r.objective << ',' << r.iterations << ','
        << r.solve_us << ',' << int(r.warning) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double read_number(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw std::runtime_error("bad number '" + s + "'");
  }
  return j.get<double>();
}

}  // namespace

void write_metrics_json(const RunMetrics& m, const std::string& path) {
  json j;
  j["schema"] = "dpcpsf.metrics/v1";
  j["task"] = task_name(m.task);
  j["controller"] = controller_name(m.controller);
  j["seed"] = m.seed;
  j["cost"] = number_or_inf(m.cost);
  j["controller_time_total_s"] = m.controller_time_total_s;
  j["controller_time_median_us"] = m.controller_time_median_us;
  j["steps"] = m.steps;
  j["triggers"] = m.triggers;
  j["trigger_fraction"] = m.trigger_fraction;
  j["min_clearance"] = m.min_clearance;
  j["final_error"] = m.final_error;
  j["diverged"] = m.diverged;
  j["csv"] = m.csv_path;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

RunMetrics read_metrics_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  const json j = json::parse(in);
  if (j.value("schema", "") != "dpcpsf.metrics/v1") {
    throw std::runtime_error(path + ": not a metrics file");
  }
  RunMetrics m;
  m.task = parse_task(j.at("task").get<std::string>());
  m.controller = parse_controller(j.at("controller").get<std::string>());
  m.seed = j.at("seed").get<std::uint64_t>();
  m.cost = read_number(j.at("cost"));
  m.controller_time_total_s = j.at("controller_time_total_s").get<double>();
  m.controller_time_median_us = j.at("controller_time_median_us").get<double>();
  m.steps = j.at("steps").get<int>();
  m.triggers = j.at("triggers").get<int>();
  m.trigger_fraction = j.at("trigger_fraction").get<double>();
  m.min_clearance = j.at("min_clearance").get<double>();
  m.final_error = j.at("final_error").get<double>();
  m.diverged = j.at("diverged").get<bool>();
  m.csv_path = j.value("csv", "");
  return m;
}

namespace {

const std::vector<std::string> kTableColumns{
    "task", "controller", "seed", "cost", "time_total_s", "time_median_us",
    "trigger_fraction", "min_clearance_m", "final_error_m"};

std::vector<std::string> table_row(const RunMetrics& m) {
  auto fmt = [](double v, int prec) {
    if (std::isinf(v)) return std::string(v > 0 ? "inf" : "-inf");
    std::ostringstream s;
    s << std::fixed << std::setprecision(prec) << v;
    return s.str();
  };
  return {task_name(m.task),
          controller_name(m.controller),
          std::to_string(m.seed),
          fmt(m.cost, 2),
          fmt(m.controller_time_total_s, 4),
          fmt(m.controller_time_median_us, 1),
          fmt(m.trigger_fraction, 4),
          fmt(m.min_clearance, 4),
          fmt(m.final_error, 4)};
}

}  // namespace

std::string format_table(const std::vector<RunMetrics>& runs) {
  std::vector<std::vector<std::string>> rows{kTableColumns};
  for (const auto& m : runs) rows.push_back(table_row(m));
  std::vector<std::size_t> width(kTableColumns.size(), 0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  std::ostringstream out;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t i = 0; i < rows[k].size(); ++i) {
      out << (i ? "  " : "") << std::setw(static_cast<int>(width[i])) << rows[k][i];
    }
    out << '\n';
    if (k == 0) {
      std::size_t total = 0;
      for (std::size_t w : width) total += w;
      out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    }
  }
  return out.str();
}

void emit_report(const std::vector<RunMetrics>& runs, const std::string& dir) {
  fs::create_directories(dir);
  {
    std::ofstream csv(fs::path(dir) / "table.csv");
    if (!csv) throw std::runtime_error("cannot write " + dir + "/table.csv");
    for (std::size_t i = 0; i < kTableColumns.size(); ++i) {
      csv << (i ? "," : "") << kTableColumns[i];
    }
    csv << '\n';
    for (const auto& m : runs) {
      const auto row = table_row(m);
      for (std::size_t i = 0; i < row.size(); ++i) csv << (i ? "," : "") << row[i];
      csv << '\n';
    }
  }
  std::ofstream txt(fs::path(dir) / "table.txt");
  if (!txt) throw std::runtime_error("cannot write " + dir + "/table.txt");
  txt << format_table(runs);
  for (const auto& m : runs) {
    if (m.log.empty()) continue;
    const std::string name = std::string("plot_") + task_name(m.task) + "_" +
                             controller_name(m.controller) + "_" + std::to_string(m.seed) + ".csv";
    std::ofstream plot(fs::path(dir) / name);
    if (!plot) throw std::runtime_error("cannot write " + dir + "/" + name);
    plot << "t,x,y,z,ref_x,ref_y,ref_z\n" << std::setprecision(8);
    for (const StepLog& r : m.log) {
      plot << r.t << ',' << r.x[0] << ',' << r.x[1] << ',' << r.x[2] << ',' << r.ref[0] << ','
           << r.ref[1] << ',' << r.ref[2] << '\n';
    }
  }
}

}  // namespace dpcpsf::bench
