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

#include "dpcpsf/dpc.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace dpcpsf::dpc {
namespace {

using json = nlohmann::json;
using ad::Tape;
using ad::Var;

template <class T>
bool finite_state(const Sub1StateT<T>& x) {
  for (const auto& v : x) {
    if (!std::isfinite(ad::value_of(v))) return false;
  }
  return true;
}

template <class T>
Sub1State values(const Sub1StateT<T>& x) {
  Sub1State out;
  for (int i = 0; i < 6; ++i) out[i] = ad::value_of(x[i]);
  return out;
}

template <class T>
Sub1Input values(const Sub1InputT<T>& u) {
  Sub1Input out;
  for (int i = 0; i < 3; ++i) out[i] = ad::value_of(u[i]);
  return out;
}

// Shared unroll for the plain (T = double) and recorded (T = Var) paths.
template <class T>
T unroll(const Policy& policy, std::span<const T> w, Sub1StateT<T> x,
         const std::vector<Sub1State>& reference, double dt, const LossWeights& lw,
         const Sub1InputT<T>& zero_u, Rollout& out) {
  const int n_steps = static_cast<int>(reference.size()) - 1;
  out.x.clear();
  out.u.clear();
  out.x_r.clear();
  out.step_loss.clear();
  out.flags.clear();
  out.diverged = false;

  T total = zero_u[0];
  for (int k = 0;; ++k) {
    const Sub1State xv = values(x);
    const bool terminal = k == n_steps;
    if (!finite_state(x)) {
      out.diverged = true;
      if (!out.flags.empty()) out.flags.back() |= kDiverged;
      break;
    }
    const Sub1InputT<T> u = terminal ? zero_u : policy.forward(w, x, reference[k]);
    const T loss = terminal ? dpc_loss(x, u, reference[k], lw) * lw.terminal_weight
                            : dpc_loss(x, u, reference[k], lw);
    const Sub1Input uv = values(u);
    out.x.push_back(xv);
    out.u.push_back(uv);
    out.x_r.push_back(reference[k]);
    out.step_loss.push_back(ad::value_of(loss));
    out.flags.push_back(step_flags(xv, uv, lw));
    if (!std::isfinite(ad::value_of(loss))) {
      out.diverged = true;
      out.flags.back() |= kDiverged;
      break;
    }
    total = total + loss;
    if (terminal) break;
    x = dynamics::sub1_step(x, u, dt);
  }
  const Sub1State& last = out.x.back();
  const Sub1State& ref = out.x_r.back();
  out.terminal_error = std::sqrt((last[0] - ref[0]) * (last[0] - ref[0]) +
                                 (last[1] - ref[1]) * (last[1] - ref[1]) +
                                 (last[2] - ref[2]) * (last[2] - ref[2]));
  out.total_loss = ad::value_of(total);
  return total;
}

double segment_distance(double ax, double ay, double bx, double by, double px, double py) {
  const double dx = bx - ax;
  const double dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(ax + t * dx - px, ay + t * dy - py);
}

bool clear_of_cylinders(const TrainConfig& cfg, double x, double y) {
  for (const auto& c : cfg.loss.cylinders) {
    if (c.clearance(x, y) < cfg.sampling.cylinder_clearance) return false;
  }
  return true;
}

Sub1State sample_point(const StateBox& box, std::mt19937_64& rng, bool with_velocity) {
  Sub1State s{};
  for (int i = 0; i < 6; ++i) {
    if (i >= 3 && !with_velocity) break;
    std::uniform_real_distribution<double> d(box.lo[i], box.hi[i]);
    s[i] = d(rng);
  }
  return s;
}

void check_sizes(const Policy& p) {
  if (p.num_weights() == 0) throw std::invalid_argument("Policy: not initialized");
}

}  // namespace

Policy::Policy(const PolicySpec& spec) : spec_(spec) {
  spec_.accel_box.validate();
  std::size_t n = 0;
  const std::vector<int> sizes = layer_sizes();
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    if (sizes[l + 1] < 1) throw std::invalid_argument("Policy: layer sizes must be >= 1");
    n += static_cast<std::size_t>(sizes[l]) * sizes[l + 1] + sizes[l + 1];
  }
  weights_.assign(n, 0.0);
}

Policy Policy::initialized(const PolicySpec& spec, std::uint64_t seed) {
  Policy p(spec);
  std::mt19937_64 rng(seed);
  const std::vector<int> sizes = p.layer_sizes();
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int n_in = sizes[l];
    const int n_out = sizes[l + 1];
    const double limit = std::sqrt(6.0 / (n_in + n_out));
    std::uniform_real_distribution<double> d(-limit, limit);
    for (int i = 0; i < n_in * n_out; ++i) p.weights_[off + i] = d(rng);
    off += static_cast<std::size_t>(n_in) * n_out + n_out;
  }
  return p;
}

std::vector<int> Policy::layer_sizes() const {
  std::vector<int> sizes{kInputDim};
  sizes.insert(sizes.end(), spec_.hidden.begin(), spec_.hidden.end());
  sizes.push_back(kOutputDim);
  return sizes;
}

void Policy::set_weights(std::vector<double> w) {
  if (w.size() != weights_.size()) throw std::invalid_argument("Policy: weight count mismatch");
  for (double v : w) {
    if (!std::isfinite(v)) throw std::invalid_argument("Policy: non-finite weight");
  }
  weights_ = std::move(w);
}

Sub1Input Policy::eval(const Sub1State& x, const Sub1State& x_r) const {
  check_sizes(*this);
  return forward(std::span<const double>(weights_), x, x_r);
}

Eigen::Matrix<double, 3, 6> Policy::jacobian(const Sub1State& x, const Sub1State& x_r) const {
  check_sizes(*this);
  Tape tape;
  Sub1StateT<Var> xv;
  for (int i = 0; i < 6; ++i) xv[i] = tape.variable(x[i]);
  const Sub1InputT<Var> u = forward(std::span<const double>(weights_), xv, x_r);
  Eigen::Matrix<double, 3, 6> j;
  std::vector<double> adj;
  for (int r = 0; r < 3; ++r) {
    tape.adjoints(u[r], adj);
    for (int c = 0; c < 6; ++c) j(r, c) = adj[xv[c].index()];
  }
  return j;
}

void Policy::save_json(std::ostream& out) const {
  json j;
  j["format"] = "dpcpsf.policy";
  j["version"] = kFormatVersion;
  j["layer_sizes"] = layer_sizes();
  j["activation"] = "tanh";
  j["output"] = "box_tanh";
  j["state_scale"] = spec_.state_scale;
  j["accel_lo"] = spec_.accel_box.lo;
  j["accel_hi"] = spec_.accel_box.hi;
  j["weights"] = weights_;
  out << j.dump(1) << "\n";
}

void Policy::save_json(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write policy file: " + path);
  save_json(f);
}

Policy Policy::load_json(std::istream& in) {
  const json j = json::parse(in);
  if (j.value("format", "") != "dpcpsf.policy") {
    throw std::runtime_error("policy file: unexpected format tag");
  }
  if (j.at("version").get<int>() != kFormatVersion) {
    throw std::runtime_error("policy file: unsupported version");
  }
  const auto sizes = j.at("layer_sizes").get<std::vector<int>>();
  if (sizes.size() < 2 || sizes.front() != kInputDim || sizes.back() != kOutputDim) {
    throw std::runtime_error("policy file: layer sizes do not match the 12 -> 3 interface");
  }
  PolicySpec spec;
  spec.hidden.assign(sizes.begin() + 1, sizes.end() - 1);
  spec.state_scale = j.at("state_scale").get<std::array<double, 6>>();
  spec.accel_box.lo = j.at("accel_lo").get<std::array<double, 3>>();
  spec.accel_box.hi = j.at("accel_hi").get<std::array<double, 3>>();
  Policy p(spec);
  p.set_weights(j.at("weights").get<std::vector<double>>());
  return p;
}

Policy Policy::load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read policy file: " + path);
  return load_json(f);
}

Sub1Input policy_eval(const Policy& policy, const Sub1State& x, const Sub1State& x_r) {
  return policy.eval(x, x_r);
}

Eigen::Matrix<double, 3, 6> policy_jacobian(const Policy& policy, const Sub1State& x,
                                            const Sub1State& x_r) {
  return policy.jacobian(x, x_r);
}

std::uint8_t step_flags(const Sub1State& x, const Sub1Input& u, const LossWeights& w) {
  std::uint8_t f = 0;
  bool finite = true;
  for (double v : x) finite = finite && std::isfinite(v);
  for (double v : u) finite = finite && std::isfinite(v);
  if (!finite) return kDiverged;
  if (!w.state_box.contains(x)) f |= kStateBoxViolation;
  if (!w.input_box.contains(u)) f |= kInputBoxViolation;
  for (const auto& c : w.cylinders) {
    if (c.clearance(x[0], x[1]) < 0.0) f |= kCylinderPenetration;
  }
  return f;
}

std::uint8_t Rollout::any_flags() const {
  std::uint8_t f = diverged ? kDiverged : 0;
  for (auto v : flags) f |= v;
  return f;
}

Rollout rollout(const Policy& policy, const Sub1State& x0,
                const std::vector<Sub1State>& reference, double dt, const LossWeights& w,
                Eigen::VectorXd* gradient, Tape* scratch) {
  check_sizes(policy);
  if (reference.size() < 2) throw std::invalid_argument("rollout: need at least one step");
  if (!(dt > 0.0)) throw std::invalid_argument("rollout: dt must be positive");
  Rollout out;
  if (gradient == nullptr) {
    unroll<double>(policy, policy.weights(), x0, reference, dt, w, Sub1Input{}, out);
    return out;
  }
  Tape local;
  Tape& tape = scratch != nullptr ? *scratch : local;
  tape.clear();
  const std::vector<Var> wv = tape.variables(std::span<const double>(policy.weights()));
  Sub1StateT<Var> xv;
  for (int i = 0; i < 6; ++i) xv[i] = tape.variable(x0[i]);
  Sub1InputT<Var> zero_u;
  for (auto& z : zero_u) z = tape.variable(0.0);
  const Var total = unroll<Var>(policy, wv, xv, reference, dt, w, zero_u, out);
  const std::vector<double> adj = tape.adjoints(total);
  gradient->resize(static_cast<Eigen::Index>(wv.size()));
  for (std::size_t i = 0; i < wv.size(); ++i) (*gradient)[i] = adj[wv[i].index()];
  return out;
}

std::vector<Sub1State> segment_reference(const Sub1State& start, const Sub1State& end,
                                         double speed, int n_steps, double dt) {
  std::vector<Sub1State> ref(n_steps + 1);
  const double dx = end[0] - start[0];
  const double dy = end[1] - start[1];
  const double dz = end[2] - start[2];
  const double len = std::sqrt(dx * dx + dy * dy + dz * dz);
  const double duration = (len > 0.0 && speed > 0.0) ? len / speed : 0.0;
  for (int k = 0; k <= n_steps; ++k) {
    const double t = k * dt;
    Sub1State& r = ref[k];
    if (duration <= 0.0 || t >= duration) {
      r = {end[0], end[1], end[2], 0.0, 0.0, 0.0};
    } else {
      const double a = t / duration;
      r = {start[0] + a * dx, start[1] + a * dy, start[2] + a * dz,
           dx / duration, dy / duration, dz / duration};
    }
  }
  return ref;
}

void TrainConfig::validate() const {
  if (rollouts_per_batch < 1 || steps_per_rollout < 1 || batches < 1) {
    throw std::invalid_argument("TrainConfig: counts must be >= 1");
  }
  if (!(dt > 0.0)) throw std::invalid_argument("TrainConfig: dt must be positive");
  if (learning_rate < 0.0 || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("TrainConfig: learning rate must be finite and >= 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("TrainConfig: momentum must be in [0, 1)");
  }
  if (!(rms_decay > 0.0 && rms_decay < 1.0)) {
    throw std::invalid_argument("TrainConfig: rms_decay must be in (0, 1)");
  }
  if (max_retries < 0) throw std::invalid_argument("TrainConfig: max_retries must be >= 0");
  sampling.initial.validate();
  if (!(sampling.anchor_fraction >= 0.0 && sampling.anchor_fraction <= 1.0)) {
    throw std::invalid_argument("TrainConfig: anchor_fraction must be in [0, 1]");
  }
  if (sampling.anchor_jitter < 0.0 || sampling.anchor_speed < 0.0) {
    throw std::invalid_argument("TrainConfig: anchor jitter and speed must be >= 0");
  }
  loss.state_box.validate();
  loss.input_box.validate();
  for (const auto& c : loss.cylinders) c.validate();
}

std::pair<Sub1State, std::vector<Sub1State>> sample_task(const TrainConfig& cfg,
                                                         std::mt19937_64& rng) {
  const StateBox& box = cfg.sampling.initial;
  constexpr int kMaxDraws = 10000;
  auto draw_clear = [&](bool with_velocity) {
    for (int i = 0; i < kMaxDraws; ++i) {
      const Sub1State s = sample_point(box, rng, with_velocity);
      if (clear_of_cylinders(cfg, s[0], s[1])) return s;
    }
    throw std::invalid_argument("sample_task: sampling box is covered by obstacles");
  };
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = cfg.steps_per_rollout;
  const SamplingConfig& sc = cfg.sampling;
  if (!sc.anchors.empty() && unit(rng) < sc.anchor_fraction) {
    const TaskAnchor& a = sc.anchors[rng() % sc.anchors.size()];
    std::uniform_real_distribution<double> jit(-sc.anchor_jitter, sc.anchor_jitter);
    std::uniform_real_distribution<double> vel(-sc.anchor_speed, sc.anchor_speed);
    for (int i = 0; i < kMaxDraws; ++i) {
      Sub1State x0{};
      Sub1State p{};
      for (int c = 0; c < 3; ++c) {
        x0[c] = a.start[c] + jit(rng);
        x0[3 + c] = vel(rng);
        p[c] = a.goal[c] + jit(rng);
      }
      if (clear_of_cylinders(cfg, x0[0], x0[1]) && clear_of_cylinders(cfg, p[0], p[1])) {
        return {x0, std::vector<Sub1State>(n + 1, p)};
      }
    }
    throw std::invalid_argument("sample_task: anchor is covered by obstacles");
  }
  auto path_clear = [&](const Sub1State& a, const Sub1State& b) {
    for (const auto& c : cfg.loss.cylinders) {
      if (segment_distance(a[0], a[1], b[0], b[1], c.x, c.y) - c.radius <
          cfg.sampling.cylinder_clearance) {
        return false;
      }
    }
    return true;
  };
  const double horizon = n * cfg.dt;
  for (int i = 0; i < kMaxDraws; ++i) {
    const Sub1State x0 = draw_clear(true);
    std::vector<Sub1State> ref;
    if (unit(rng) < sc.static_fraction) {
      ref.assign(n + 1, draw_clear(false));
    } else {
      const Sub1State a = draw_clear(false);
      Sub1State b = draw_clear(false);
      const double speed = sc.max_reference_speed * (0.3 + 0.7 * unit(rng));
      const double len = std::sqrt((b[0] - a[0]) * (b[0] - a[0]) + (b[1] - a[1]) * (b[1] - a[1]) +
                                   (b[2] - a[2]) * (b[2] - a[2]));
      // The segment must finish within 60% of the horizon.
      const double max_len = 0.6 * horizon * speed;
      if (len > max_len && len > 0.0) {
        for (int c = 0; c < 3; ++c) b[c] = a[c] + (b[c] - a[c]) * (max_len / len);
      }
      if (!path_clear(a, b)) continue;
      ref = segment_reference(a, b, speed, n, cfg.dt);
    }
    if (sc.clear_approach && !path_clear(x0, ref.front())) continue;
    return {x0, std::move(ref)};
  }
  throw std::invalid_argument("sample_task: cannot place a task clear of the obstacles");
}

TrainResult train(const TrainConfig& cfg, const BatchCallback& on_batch) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  TrainResult res;
  res.policy = Policy::initialized(cfg.policy, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<double> w = res.policy.weights();
  const std::size_t n_w = w.size();
  std::vector<double> mean(n_w, 0.0);
  std::vector<double> mean_sq(n_w, 0.0);
  double m_corr = 1.0;
  double v_corr = 1.0;
  double lr = cfg.learning_rate;
  Tape tape;

  for (int b = 0; b < cfg.batches; ++b) {
    std::vector<std::pair<Sub1State, std::vector<Sub1State>>> tasks;
    for (int i = 0; i < cfg.rollouts_per_batch; ++i) tasks.push_back(sample_task(cfg, rng));

    int retries = 0;
    std::vector<Rollout> batch_rollouts;
    Eigen::VectorXd grad_sum;
    double loss_sum = 0.0;
    for (;;) {
      batch_rollouts.clear();
      grad_sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_w));
      loss_sum = 0.0;
      Eigen::VectorXd g;
      for (int i = 0; i < cfg.rollouts_per_batch; ++i) {
        Rollout r = rollout(res.policy, tasks[i].first, tasks[i].second, cfg.dt, cfg.loss, &g,
                            &tape);
        r.batch = b;
        r.index = i;
        loss_sum += r.total_loss;
        grad_sum += g;
        batch_rollouts.push_back(std::move(r));
      }
      if (std::isfinite(loss_sum) && grad_sum.allFinite()) break;
      if (++retries > cfg.max_retries) {
        std::ostringstream msg;
        msg << "training diverged at batch " << b << ": loss " << loss_sum
            << " after " << cfg.max_retries << " learning-rate halvings (lr " << lr << ")";
        throw TrainingError(msg.str());
      }
      lr *= 0.5;
    }

    const double inv = 1.0 / cfg.rollouts_per_batch;
    const Eigen::VectorXd grad = grad_sum * inv;
    BatchStats stats;
    stats.batch = b;
    stats.mean_loss = loss_sum * inv;
    stats.grad_norm = grad.norm();
    stats.learning_rate = lr;
    stats.retries = retries;
    res.store.batches.push_back(stats);
    for (auto& r : batch_rollouts) res.store.rollouts.push_back(std::move(r));
    if (on_batch) on_batch(stats);

    if (stats.grad_norm < cfg.grad_tolerance) {
      res.converged = true;
      break;
    }
    m_corr *= cfg.momentum;
    v_corr *= cfg.rms_decay;
    for (std::size_t i = 0; i < n_w; ++i) {
      const double gi = grad[static_cast<Eigen::Index>(i)];
      mean[i] = cfg.momentum * mean[i] + (1.0 - cfg.momentum) * gi;
      mean_sq[i] = cfg.rms_decay * mean_sq[i] + (1.0 - cfg.rms_decay) * gi * gi;
      const double m_hat = mean[i] / (1.0 - m_corr);
      const double v_hat = mean_sq[i] / (1.0 - v_corr);
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.rms_epsilon);
    }
    res.policy.set_weights(w);
    lr *= cfg.lr_decay;
  }
  return res;
}

std::vector<const Rollout*> RolloutStore::final_batch() const {
  std::vector<const Rollout*> out;
  if (rollouts.empty()) return out;
  const int last = rollouts.back().batch;
  for (const auto& r : rollouts) {
    if (r.batch == last) out.push_back(&r);
  }
  return out;
}

void RolloutStore::write_csv(std::ostream& out) const {
  out << "batch,rollout,k,x,y,z,xdot,ydot,zdot,xddot,yddot,zddot,"
         "x_r,y_r,z_r,xdot_r,ydot_r,zdot_r,flags\n";
  char buf[64];
  for (const auto& r : rollouts) {
    for (std::size_t k = 0; k < r.x.size(); ++k) {
      out << r.batch << ',' << r.index << ',' << k;
      auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), ",%.9g", v);
        out << buf;
      };
      for (double v : r.x[k]) put(v);
      for (double v : r.u[k]) put(v);
      for (double v : r.x_r[k]) put(v);
      out << ',' << static_cast<int>(r.flags[k]) << '\n';
    }
  }
}

void RolloutStore::write_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write rollout store: " + path);
  write_csv(f);
}

RolloutStore RolloutStore::read_csv(std::istream& in) {
  RolloutStore store;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("rollout store: empty file");
  std::vector<double> fields;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    fields.clear();
    const char* p = line.c_str();
    char* end = nullptr;
    while (*p != '\0') {
      fields.push_back(std::strtod(p, &end));
      if (end == p) throw std::runtime_error("rollout store: malformed row: " + line);
      p = end;
      if (*p == ',') ++p;
    }
    if (fields.size() != 19) throw std::runtime_error("rollout store: expected 19 columns");
    const int batch = static_cast<int>(fields[0]);
    const int index = static_cast<int>(fields[1]);
    if (store.rollouts.empty() || store.rollouts.back().batch != batch ||
        store.rollouts.back().index != index) {
      Rollout r;
      r.batch = batch;
      r.index = index;
      store.rollouts.push_back(std::move(r));
    }
    Rollout& r = store.rollouts.back();
    Sub1State x, xr;
    Sub1Input u;
    for (int i = 0; i < 6; ++i) x[i] = fields[3 + i];
    for (int i = 0; i < 3; ++i) u[i] = fields[9 + i];
    for (int i = 0; i < 6; ++i) xr[i] = fields[12 + i];
    r.x.push_back(x);
    r.u.push_back(u);
    r.x_r.push_back(xr);
    r.flags.push_back(static_cast<std::uint8_t>(fields[18]));
    r.diverged = r.diverged || (r.flags.back() & kDiverged) != 0;
  }
  for (auto& r : store.rollouts) {
    const Sub1State& a = r.x.back();
    const Sub1State& b = r.x_r.back();
    r.terminal_error = std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                                 (a[2] - b[2]) * (a[2] - b[2]));
  }
  return store;
}

RolloutStore RolloutStore::read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read rollout store: " + path);
  return read_csv(f);
}

}  // namespace dpcpsf::dpc
