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

#include "dpcpsf/psf.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace dpcpsf::psf {

using Eigen::VectorXd;
using safeset::Hyperplane;
using safeset::SafeSet;
using safeset::Transform;

HorizonSchedule make_schedule(double first_step, double horizon, int steps) {
  if (steps < 2) throw ScheduleError("make_schedule: need at least 2 steps");
  if (!(first_step > 0.0) || !std::isfinite(first_step)) {
    throw ScheduleError("make_schedule: first step must be positive");
  }
  if (!std::isfinite(horizon)) throw ScheduleError("make_schedule: horizon not finite");
  const double flat = steps * first_step;
  const double slack = 1e-12 * std::max(horizon, flat);
  if (horizon < flat - slack) {
    throw ScheduleError("make_schedule: horizon " + std::to_string(horizon) +
                        " s is shorter than steps * first step");
  }
  HorizonSchedule s;
  s.first_step = first_step;
  s.horizon = horizon;
  s.steps = steps;
  const double slope =
      std::abs(horizon - flat) <= slack ? 0.0 : 2.0 * (horizon / steps - first_step) / (steps - 1);
  s.dt.resize(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) s.dt[static_cast<std::size_t>(k)] = first_step + k * slope;
  return s;
}

LinearPolicy linearize_policy(const dpc::Policy& policy, const Sub1State& x0,
                              const Sub1State& x_r) {
  LinearPolicy lp;
  lp.u0 = dpc::policy_eval(policy, x0, x_r);
  lp.jacobian = dpc::policy_jacobian(policy, x0, x_r);
  lp.x0 = x0;
  return lp;
}

double PSFConfig::alpha_of(int set) const {
  return set < static_cast<int>(alpha.size()) ? alpha[static_cast<std::size_t>(set)] : default_alpha;
}

double PSFConfig::margin_of(int set) const {
  return set < static_cast<int>(margin.size()) ? margin[static_cast<std::size_t>(set)]
                                               : default_margin;
}

void PSFConfig::validate() const {
  if (schedule.steps < 2 || static_cast<int>(schedule.dt.size()) != schedule.steps) {
    throw std::invalid_argument("PSFConfig: schedule not built");
  }
  if (!(default_alpha >= 0.0) || !(default_margin >= 0.0)) {
    throw std::invalid_argument("PSFConfig: alpha and margin must be >= 0");
  }
  for (double a : alpha) {
    if (!(a >= 0.0)) throw std::invalid_argument("PSFConfig: alpha must be >= 0");
  }
  for (double m : margin) {
    if (!(m >= 0.0)) throw std::invalid_argument("PSFConfig: margin must be >= 0");
  }
  input_box.validate();
  solver.validate();
}

namespace {

template <class T>
T make_const(double v, ad::Tape* tape) {
  if constexpr (ad::is_var_v<T>) {
    return tape->variable(v);
  } else {
    (void)tape;
    return v;
  }
}

// Deviation and penalty sums for inputs u (3N).
template <class T>
std::pair<T, T> objective_terms(std::span<const T> u, const Sub1State& x0, const LinearPolicy& lp,
                                const std::vector<Hyperplane>& planes, const SafeSet& ss,
                                const PSFConfig& cfg, ad::Tape* tape) {
  const HorizonSchedule& sched = cfg.schedule;
  dynamics::Sub1StateT<T> x;
  for (int i = 0; i < 6; ++i) x[i] = make_const<T>(x0[i], tape);
  T dev = make_const<T>(0.0, tape);
  T pen = make_const<T>(0.0, tape);
  for (int k = 0; k < sched.steps; ++k) {
    const auto ujac = lp.evaluate(x);
    dynamics::Sub1InputT<T> uk;
    for (int i = 0; i < 3; ++i) {
      uk[i] = u[static_cast<std::size_t>(3 * k + i)];
      const T d = ujac[i] - uk[i];
      dev = dev + d * d;
    }
    x = dynamics::sub1_step(x, uk, sched.dt[static_cast<std::size_t>(k)]);
    for (const Hyperplane& h : planes) {
      const auto& set = ss.set(h.set_id);
      const double alpha = cfg.alpha_of(h.set_id);
      if (alpha == 0.0) continue;
      const double m = cfg.margin_of(h.set_id);
      if (set.transform == Transform::kIdentity) {
        pen = pen + alpha * hyperplane_penalty<T>(h, std::span<const T>(x.data(), 6), m);
      } else {
        const auto y = safeset::cyl_transform(x, set.cylinder);
        pen = pen + alpha * hyperplane_penalty<T>(h, std::span<const T>(y.data(), 2), m);
      }
    }
  }
  if (cfg.literal_sum) dev = dev * static_cast<double>(std::max<std::size_t>(planes.size(), 1));
  return {dev, pen};
}

}  // namespace

PSFObjective psf_objective(const VectorXd& inputs, const Sub1State& x0, const LinearPolicy& lp,
                           const std::vector<Hyperplane>& planes, const SafeSet& ss,
                           const PSFConfig& cfg) {
  if (inputs.size() != 3 * cfg.schedule.steps) {
    throw std::invalid_argument("psf_objective: input sequence length mismatch");
  }
  const auto [dev, pen] = objective_terms<double>(
      std::span<const double>(inputs.data(), static_cast<std::size_t>(inputs.size())), x0, lp,
      planes, ss, cfg, nullptr);
  return PSFObjective{dev, pen};
}

VectorXd nominal_sequence(const Sub1State& x0, const LinearPolicy& lp,
                          const HorizonSchedule& sched) {
  VectorXd u(3 * sched.steps);
  Sub1State x = x0;
  for (int k = 0; k < sched.steps; ++k) {
    const Sub1Input uk = lp.evaluate(x);
    for (int i = 0; i < 3; ++i) u[3 * k + i] = uk[i];
    x = dynamics::sub1_step(x, uk, sched.dt[static_cast<std::size_t>(k)]);
  }
  return u;
}

FilterResult psf_solve(const Sub1State& x0, const LinearPolicy& lp,
                       const std::vector<Hyperplane>& planes, const SafeSet& ss,
                       const PSFConfig& cfg, const VectorXd& initial) {
  cfg.validate();
  const Eigen::Index n = 3 * cfg.schedule.steps;
  ad::Tape tape;
  std::vector<double> adj;
  auto f = [&](const VectorXd& u, VectorXd* grad) -> double {
    try {
      if (!grad) {
        return psf_objective(u, x0, lp, planes, ss, cfg).total();
      }
      tape.clear();
      const std::vector<ad::Var> vars = tape.variables(u);
      const auto [dev, pen] =
          objective_terms<ad::Var>(std::span<const ad::Var>(vars), x0, lp, planes, ss, cfg, &tape);
      const ad::Var total = dev + pen;
      tape.adjoints(total, adj);
      grad->resize(n);
      for (Eigen::Index i = 0; i < n; ++i) (*grad)[i] = adj[vars[static_cast<std::size_t>(i)].index()];
      return total.value();
    } catch (const std::domain_error&) {
      // The prediction crossed a cylinder axis.
      if (grad) grad->setZero(n);
      return std::numeric_limits<double>::infinity();
    }
  };

  VectorXd start = initial.size() == n ? initial : nominal_sequence(x0, lp, cfg.schedule);
  VectorXd lo(n), hi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    lo[i] = cfg.input_box.lo[static_cast<std::size_t>(i % 3)];
    hi[i] = cfg.input_box.hi[static_cast<std::size_t>(i % 3)];
  }
  const bool bounded =
      (lo.array() > -PSFConfig::kInf).any() || (hi.array() < PSFConfig::kInf).any();
  const optim::MinimizeResult r = bounded
                                      ? optim::minimize(f, std::move(start), lo, hi, cfg.solver)
                                      : optim::minimize(f, std::move(start), cfg.solver);
  FilterResult out;
  out.triggered = true;
  out.u = {r.x[0], r.x[1], r.x[2]};
  out.objective = r.value;
  out.iterations = r.iterations;
  out.warning = r.status == optim::Status::kLineSearchFailed;
  out.hyperplanes = planes;
  out.sequence = r.x;
  return out;
}

namespace {

// Hyperplanes at x0 and whether every half-space test passes.
std::pair<std::vector<Hyperplane>, bool> trigger_test(const Sub1State& x0, const SafeSet& ss) {
  std::vector<Hyperplane> planes;
  planes.reserve(static_cast<std::size_t>(ss.num_sets()));
  bool inside = true;
  for (int i = 0; i < ss.num_sets(); ++i) {
    const VectorXd y = ss.to_set_space(i, x0);
    planes.push_back(safeset::nearest_hyperplane(y, ss.set(i), i));
    inside = inside && safeset::half_space_holds(planes.back(), y, ss.set(i));
  }
  return {std::move(planes), inside};
}

}  // namespace

FilterResult filter(const Sub1State& x0, const Sub1State& x_r, const dpc::Policy& policy,
                    const SafeSet& ss, const PSFConfig& cfg) {
  auto [planes, inside] = trigger_test(x0, ss);
  if (inside) {
    FilterResult out;
    out.u = dpc::policy_eval(policy, x0, x_r);
    out.hyperplanes = std::move(planes);
    return out;
  }
  return psf_solve(x0, linearize_policy(policy, x0, x_r), planes, ss, cfg);
}

SafetyFilter::SafetyFilter(const dpc::Policy& policy, const SafeSet& ss, PSFConfig cfg)
    : policy_(&policy), ss_(&ss), cfg_(std::move(cfg)) {
  cfg_.validate();
}

FilterResult SafetyFilter::step(const Sub1State& x0, const Sub1State& x_r) {
  auto [planes, inside] = trigger_test(x0, *ss_);
  if (inside) {
    warm_.resize(0);
    FilterResult out;
    out.u = dpc::policy_eval(*policy_, x0, x_r);
    out.hyperplanes = std::move(planes);
    return out;
  }
  VectorXd initial;
  if (cfg_.warm_start && warm_.size() == 3 * cfg_.schedule.steps) {
    const Eigen::Index n = warm_.size();
    initial.resize(n);
    initial.head(n - 3) = warm_.tail(n - 3);
    initial.tail(3) = warm_.tail(3);
  }
  FilterResult out = psf_solve(x0, linearize_policy(*policy_, x0, x_r), planes, *ss_, cfg_, initial);
  warm_ = out.sequence;
  return out;
}

}  // namespace dpcpsf::psf
