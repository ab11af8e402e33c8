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

#include "dpcpsf/mpc.hpp"

#include <chrono>
#include <cmath>
#include <span>

#include "dpcpsf/psf.hpp"

namespace dpcpsf::mpc {

using Eigen::VectorXd;

void MPCCostWeights::validate() const {
  for (double v : q) {
    if (!(v >= 0.0)) throw std::invalid_argument("MPCCostWeights: Q must be non-negative");
  }
  for (double v : r) {
    if (!(v >= 0.0)) throw std::invalid_argument("MPCCostWeights: R must be non-negative");
  }
}

void MPCConfig::validate() const {
  if (steps < 2) throw std::invalid_argument("MPCConfig: steps must be >= 2");
  if (!(horizon > 0.0)) throw std::invalid_argument("MPCConfig: horizon must be > 0");
  if (!(cylinder_slope >= 0.0)) throw std::invalid_argument("MPCConfig: cylinder_slope must be >= 0");
  if (!(cylinder_penalty >= 0.0)) {
    throw std::invalid_argument("MPCConfig: cylinder_penalty must be >= 0");
  }
  for (const auto& c : cylinders) c.validate();
  if (schedule == ScheduleKind::kLinear) psf::make_schedule(first_step, horizon, steps);
  solver.validate();
  model.validate();
}

std::vector<double> MPCConfig::timesteps() const {
  if (schedule == ScheduleKind::kConstant) {
    return std::vector<double>(static_cast<std::size_t>(steps), horizon / steps);
  }
  return psf::make_schedule(first_step, horizon, steps).dt;
}

MPCConfig MPCConfig::nmpc() { return MPCConfig{}; }

MPCConfig MPCConfig::vtnmpc() {
  MPCConfig c;
  c.steps = 30;
  c.schedule = ScheduleKind::kLinear;
  c.first_step = 0.01;
  return c;
}

namespace {

struct Grid {
  std::vector<double> dt;
  // Reference and look-ahead time at the end of each step.
  std::vector<QuadState> ref;
  std::vector<double> ahead;
};

MPCCostWeights stage_weights(const MPCConfig& cfg, MPCCostWeights w) {
  if (cfg.input_about_hover) w.u_ref = dynamics::hover_input(cfg.model);
  return w;
}

Grid make_grid(const Reference& ref, double t0, const MPCConfig& cfg) {
  Grid g;
  g.dt = cfg.timesteps();
  double t = 0.0;
  for (double d : g.dt) {
    t += d;
    g.ahead.push_back(t);
    g.ref.push_back(ref(t0 + t));
  }
  return g;
}

template <class T>
T objective_terms(std::span<const T> u, const QuadState& x0, const Grid& g,
                  const MPCConfig& cfg, const MPCCostWeights& w, ad::Tape* tape) {
  QuadStateT<T> x;
  for (int i = 0; i < dynamics::kQuadStateDim; ++i) {
    if constexpr (ad::is_var_v<T>) {
      x[i] = tape->variable(x0[i]);
    } else {
      (void)tape;
      x[i] = x0[i];
    }
  }
  T total{};
  for (std::size_t k = 0; k < g.dt.size(); ++k) {
    QuadInputT<T> uk;
    for (int i = 0; i < 4; ++i) uk[i] = u[4 * k + static_cast<std::size_t>(i)];
    x = dynamics::euler_step(x, uk, g.dt[k], cfg.model);
    const T stage = mpc_cost(x, uk, g.ref[k], w);
    total = k == 0 ? stage : total + stage;
    for (const auto& c : cfg.cylinders) {
      const T v = augmented_cylinder(x[dynamics::kX], x[dynamics::kY], g.ahead[k], c,
                                     cfg.cylinder_slope);
      if (ad::value_of(v) > 0.0) total = total + cfg.cylinder_penalty * (v * v);
    }
  }
  return total;
}

}  // namespace

double ocp_objective(const VectorXd& inputs, const QuadState& x0, const Reference& ref,
                     double t0, const MPCConfig& cfg, const MPCCostWeights& w) {
  if (inputs.size() != 4 * cfg.steps) {
    throw std::invalid_argument("ocp_objective: input sequence length mismatch");
  }
  const Grid g = make_grid(ref, t0, cfg);
  return objective_terms<double>(
      std::span<const double>(inputs.data(), static_cast<std::size_t>(inputs.size())), x0, g, cfg,
      stage_weights(cfg, w), nullptr);
}

std::vector<QuadState> predict(const QuadState& x0, const VectorXd& inputs,
                               const MPCConfig& cfg) {
  if (inputs.size() != 4 * cfg.steps) {
    throw std::invalid_argument("predict: input sequence length mismatch");
  }
  const std::vector<double> dt = cfg.timesteps();
  std::vector<QuadState> xs{x0};
  for (int k = 0; k < cfg.steps; ++k) {
    const QuadInput uk{inputs[4 * k], inputs[4 * k + 1], inputs[4 * k + 2], inputs[4 * k + 3]};
    xs.push_back(dynamics::euler_step(xs.back(), uk, dt[static_cast<std::size_t>(k)], cfg.model));
  }
  return xs;
}

OCPSolution solve_ocp(const QuadState& x0, const Reference& ref, double t0,
                      const MPCConfig& cfg, const MPCCostWeights& weights,
                      const VectorXd& initial) {
  const auto start_time = std::chrono::steady_clock::now();
  cfg.validate();
  weights.validate();
  const MPCCostWeights w = stage_weights(cfg, weights);
  const Eigen::Index n = 4 * cfg.steps;
  const Grid g = make_grid(ref, t0, cfg);
  ad::Tape tape;
  std::vector<double> adj;
  auto f = [&](const VectorXd& u, VectorXd* grad) -> double {
    const std::span<const double> us(u.data(), static_cast<std::size_t>(n));
    if (!grad) return objective_terms<double>(us, x0, g, cfg, w, nullptr);
    tape.clear();
    const std::vector<ad::Var> vars = tape.variables(u);
    const ad::Var total =
        objective_terms<ad::Var>(std::span<const ad::Var>(vars), x0, g, cfg, w, &tape);
    tape.adjoints(total, adj);
    grad->resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      (*grad)[i] = adj[vars[static_cast<std::size_t>(i)].index()];
    }
    return total.value();
  };

  VectorXd start = initial;
  if (start.size() != n) start = VectorXd::Constant(n, cfg.model.hover_command());
  const VectorXd lo = VectorXd::Constant(n, cfg.model.input_lo);
  const VectorXd hi = VectorXd::Constant(n, cfg.model.input_hi);
  const optim::MinimizeResult r = optim::minimize(f, std::move(start), lo, hi, cfg.solver);

  OCPSolution out;
  for (int k = 0; k < cfg.steps; ++k) {
    out.inputs.push_back({r.x[4 * k], r.x[4 * k + 1], r.x[4 * k + 2], r.x[4 * k + 3]});
  }
  out.states = predict(x0, r.x, cfg);
  out.objective = r.value;
  out.iterations = r.iterations;
  out.status = r.status;
  out.warning = r.status == optim::Status::kLineSearchFailed;
  out.wall_time_us = std::chrono::duration<double, std::micro>(
                         std::chrono::steady_clock::now() - start_time)
                         .count();
  return out;
}

MPCController::MPCController(MPCConfig cfg, MPCCostWeights w)
    : cfg_(std::move(cfg)), w_(w) {
  cfg_.validate();
  w_.validate();
}

OCPSolution MPCController::step(const QuadState& x0, const Reference& ref, double t0) {
  VectorXd initial;
  if (cfg_.warm_start && warm_.size() == 4 * cfg_.steps) {
    const Eigen::Index n = warm_.size();
    initial.resize(n);
    initial.head(n - 4) = warm_.tail(n - 4);
    initial.tail(4) = warm_.tail(4);
  }
  OCPSolution s = solve_ocp(x0, ref, t0, cfg_, w_, initial);
  warm_.resize(4 * cfg_.steps);
  for (int k = 0; k < cfg_.steps; ++k) {
    for (int i = 0; i < 4; ++i) warm_[4 * k + i] = s.inputs[static_cast<std::size_t>(k)][i];
  }
  return s;
}

double accumulate_task_cost(const std::vector<QuadState>& states,
                            const std::vector<QuadInput>& inputs,
                            const std::vector<QuadState>& references,
                            const std::vector<CylinderConstraint>& cylinders,
                            const MPCCostWeights& w) {
  if (states.size() != inputs.size() || states.size() != references.size()) {
    throw std::invalid_argument("accumulate_task_cost: sequences are not aligned");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < states.size(); ++k) {
    for (const auto& c : cylinders) {
      if (c.clearance(states[k][dynamics::kX], states[k][dynamics::kY]) < 0.0) {
        return std::numeric_limits<double>::infinity();
      }
    }
    total += mpc_cost(states[k], inputs[k], references[k], w);
  }
  return total;
}

}  // namespace dpcpsf::mpc
