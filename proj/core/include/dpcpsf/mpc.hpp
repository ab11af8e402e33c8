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

// Nonlinear MPC baselines on the full 17-state model. Both controllers use
// single shooting over the motor commands; they differ only in the prediction
// time grid.

#pragma once

#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "dpcpsf/autodiff.hpp"
#include "dpcpsf/dynamics.hpp"
#include "dpcpsf/geometry.hpp"
#include "dpcpsf/optim.hpp"

namespace dpcpsf::mpc {

using dynamics::QuadInput;
using dynamics::QuadInputT;
using dynamics::QuadState;
using dynamics::QuadStateT;

struct MPCCostWeights {
  // Position and velocity weighted, attitude and rotor speeds free.
  std::array<double, dynamics::kQuadStateDim> q{1, 1, 1, 0, 0, 0, 0, 1, 1, 1,
                                                1, 1, 1, 0, 0, 0, 0};
  std::array<double, dynamics::kQuadInputDim> r{1, 1, 1, 1};
  // Input penalized as (u - u_ref); zero gives the plain u^T R u.
  QuadInput u_ref{};

  void validate() const;
};

// (x_r - x)^T Q (x_r - x) + (u - u_ref)^T R (u - u_ref).
template <class T, class U>
auto mpc_cost(const QuadStateT<T>& x, const QuadInputT<U>& u, const QuadState& x_r,
              const MPCCostWeights& w) {
  using R = std::conditional_t<ad::is_var_v<T> || ad::is_var_v<U>, ad::Var, double>;
  const U d0 = u[0] - w.u_ref[0];
  R acc = d0 * d0 * w.r[0];
  for (int i = 1; i < dynamics::kQuadInputDim; ++i) {
    const U d = u[i] - w.u_ref[i];
    acc = acc + d * d * w.r[i];
  }
  for (int i = 0; i < dynamics::kQuadStateDim; ++i) {
    if (w.q[i] == 0.0) continue;
    const T e = x[i] - x_r[i];
    acc = acc + e * e * w.q[i];
  }
  return acc;
}

// r^2 (1 + slope t_ahead) - d^2; non-positive when the constraint holds.
template <class T>
T augmented_cylinder(const T& px, const T& py, double t_ahead, const CylinderConstraint& c,
                     double slope) {
  if (!(t_ahead >= 0.0)) throw std::invalid_argument("augmented_cylinder: t_ahead must be >= 0");
  const T dx = px - c.x;
  const T dy = py - c.y;
  return c.radius * c.radius * (1.0 + slope * t_ahead) - (dx * dx + dy * dy);
}

enum class ScheduleKind { kConstant, kLinear };

struct MPCConfig {
  double horizon = 2.0;  // s
  int steps = 200;
  ScheduleKind schedule = ScheduleKind::kConstant;
  // First step of a linear schedule.
  double first_step = 0.01;
  // Growth rate of the cylinder radius squared along the horizon, 1/s.
  double cylinder_slope = 0.1;
  double cylinder_penalty = 1e4;
  std::vector<CylinderConstraint> cylinders;
  optim::LbfgsConfig solver{};
  bool warm_start = true;
  // Penalize motor commands relative to the model's hover command instead of
  // zero. Replaces the weights' u_ref inside the optimizer.
  bool input_about_hover = true;
  // Internal prediction model.
  dynamics::QuadParams model{};

  void validate() const;
  std::vector<double> timesteps() const;

  // 200 constant steps of 10 ms.
  static MPCConfig nmpc();
  // 30 linearly growing steps starting at 10 ms.
  static MPCConfig vtnmpc();
};

// Reference state at absolute time t.
using Reference = std::function<QuadState(double t)>;

struct OCPSolution {
  std::vector<QuadInput> inputs;
  // inputs.size() + 1 states starting at x0.
  std::vector<QuadState> states;
  double objective = 0.0;
  int iterations = 0;
  double wall_time_us = 0.0;
  optim::Status status = optim::Status::kMaxIterations;
  bool warning = false;
};

// Objective of a flattened motor-command sequence (4 entries per step).
double ocp_objective(const Eigen::VectorXd& inputs, const QuadState& x0, const Reference& ref,
                     double t0, const MPCConfig& cfg, const MPCCostWeights& w);
std::vector<QuadState> predict(const QuadState& x0, const Eigen::VectorXd& inputs,
                               const MPCConfig& cfg);

// Minimizes over motor commands in the model's input box. An empty `initial`
// starts from hover.
OCPSolution solve_ocp(const QuadState& x0, const Reference& ref, double t0,
                      const MPCConfig& cfg, const MPCCostWeights& w = {},
                      const Eigen::VectorXd& initial = {});

// Receding-horizon wrapper that owns the warm-start buffer.
class MPCController {
 public:
  explicit MPCController(MPCConfig cfg, MPCCostWeights w = {});

  OCPSolution step(const QuadState& x0, const Reference& ref, double t0);
  void reset() { warm_.resize(0); }
  const MPCConfig& config() const { return cfg_; }

 private:
  MPCConfig cfg_;
  MPCCostWeights w_;
  Eigen::VectorXd warm_;
};

// Sum of stage costs along a closed-loop run; +inf once any state lies inside
// a cylinder.
double accumulate_task_cost(const std::vector<QuadState>& states,
                            const std::vector<QuadInput>& inputs,
                            const std::vector<QuadState>& references,
                            const std::vector<CylinderConstraint>& cylinders,
                            const MPCCostWeights& w = {});

}  // namespace dpcpsf::mpc
