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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

namespace dpcpsf::mpc {
namespace {

using dynamics::hover_input;
using dynamics::hover_state;
using Eigen::VectorXd;

const dynamics::QuadParams kModel{};

QuadState zero_state() {
  QuadState x{};
  x[dynamics::kQ0] = 1.0;
  return x;
}

TEST(MpcCostTest, ZeroAtReferenceWithZeroInput) {
  const QuadState x = hover_state(kModel, 1.0, 2.0, 3.0);
  EXPECT_EQ(mpc_cost(x, QuadInput{}, x, MPCCostWeights{}), 0.0);
}

TEST(MpcCostTest, UnitPositionError) {
  QuadState x = zero_state();
  const QuadState r = zero_state();
  x[dynamics::kX] = 1.0;
  EXPECT_DOUBLE_EQ(mpc_cost(x, QuadInput{}, r, MPCCostWeights{}), 1.0);
}

TEST(MpcCostTest, OrientationAndRotorsAreFree) {
  QuadState x = zero_state();
  const QuadState r = zero_state();
  x[dynamics::kQ0] = 0.0;
  x[dynamics::kQ3] = 1.0;
  for (int i = dynamics::kW1; i <= dynamics::kW4; ++i) x[i] = 500.0;
  EXPECT_EQ(mpc_cost(x, QuadInput{}, r, MPCCostWeights{}), 0.0);
}

TEST(MpcCostTest, QuadraticInInputAndRates) {
  QuadState x = zero_state();
  x[dynamics::kVy] = 2.0;
  x[dynamics::kR] = -3.0;
  const QuadInput u{0.5, 0.5, 0.5, 0.5};
  EXPECT_DOUBLE_EQ(mpc_cost(x, u, zero_state(), MPCCostWeights{}), 4.0 + 9.0 + 1.0);
}

TEST(MpcCostTest, InputReference) {
  MPCCostWeights w;
  w.u_ref = hover_input(kModel);
  const QuadState x = zero_state();
  EXPECT_EQ(mpc_cost(x, w.u_ref, x, w), 0.0);
  QuadInput u = w.u_ref;
  u[2] += 0.25;
  EXPECT_DOUBLE_EQ(mpc_cost(x, u, x, w), 0.0625);
}

TEST(MpcCostTest, RejectsNegativeWeights) {
  MPCCostWeights w;
  w.q[3] = -1.0;
  EXPECT_THROW(w.validate(), std::invalid_argument);
  w = MPCCostWeights{};
  w.r[0] = -1.0;
  EXPECT_THROW(w.validate(), std::invalid_argument);
}

TEST(AugmentedCylinderTest, PlainConstraintAtZeroLookAhead) {
  const CylinderConstraint c{1.0, -1.0, 0.5};
  EXPECT_DOUBLE_EQ(augmented_cylinder(1.0, -1.0, 0.0, c, 0.1), 0.25);
  EXPECT_NEAR(augmented_cylinder(1.5, -1.0, 0.0, c, 0.1), 0.0, 1e-15);
  EXPECT_LT(augmented_cylinder(3.0, -1.0, 0.0, c, 0.1), 0.0);
}

TEST(AugmentedCylinderTest, GrowsAlongTheHorizon) {
  const CylinderConstraint c{0.0, 0.0, 1.0};
  EXPECT_NEAR(augmented_cylinder(std::sqrt(1.2), 0.0, 2.0, c, 0.1), 0.0, 1e-15);
  EXPECT_GT(augmented_cylinder(1.05, 0.0, 2.0, c, 0.1), 0.0);
  EXPECT_THROW(augmented_cylinder(1.0, 0.0, -0.1, c, 0.1), std::invalid_argument);
}

TEST(TaskCostTest, PerfectTrackingCostsNothing) {
  const std::vector<QuadState> xs(7, hover_state(kModel, 0, 0, 1));
  const std::vector<QuadInput> us(7, QuadInput{});
  EXPECT_EQ(accumulate_task_cost(xs, us, xs, {}), 0.0);
}

TEST(TaskCostTest, SumsConstantError) {
  const int k = 13;
  QuadState x = zero_state();
  x[dynamics::kY] = 1.0;
  const std::vector<QuadState> xs(k, x);
  const std::vector<QuadState> rs(k, zero_state());
  const std::vector<QuadInput> us(k, QuadInput{});
  EXPECT_DOUBLE_EQ(accumulate_task_cost(xs, us, rs, {}), double(k));
}

TEST(TaskCostTest, PenetrationIsInfinite) {
  std::vector<QuadState> xs(5, hover_state(kModel, -2, 0, 1));
  xs[3] = hover_state(kModel, 0.1, 0.1, 1);
  const std::vector<QuadInput> us(5, QuadInput{});
  const std::vector<CylinderConstraint> cyl{{0.0, 0.2, 0.5}};
  EXPECT_TRUE(std::isinf(accumulate_task_cost(xs, us, xs, cyl)));
  xs[3] = xs[2];
  EXPECT_TRUE(std::isfinite(accumulate_task_cost(xs, us, xs, cyl)));
  EXPECT_THROW(accumulate_task_cost(xs, us, std::vector<QuadState>(4), cyl),
               std::invalid_argument);
}

TEST(MpcConfigTest, Validation) {
  MPCConfig c;
  c.steps = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = MPCConfig{};
  c.horizon = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = MPCConfig::vtnmpc();
  c.horizon = 0.1;  // shorter than 30 first steps
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_NO_THROW(MPCConfig::nmpc().validate());
  EXPECT_NO_THROW(MPCConfig::vtnmpc().validate());
}

TEST(MpcConfigTest, Schedules) {
  const auto n = MPCConfig::nmpc().timesteps();
  ASSERT_EQ(n.size(), 200u);
  for (double d : n) EXPECT_EQ(d, 0.01);
  const auto v = MPCConfig::vtnmpc().timesteps();
  ASSERT_EQ(v.size(), 30u);
  EXPECT_EQ(v.front(), 0.01);
  for (std::size_t k = 1; k < v.size(); ++k) EXPECT_GT(v[k], v[k - 1]);
}

MPCConfig small_vt() {
  MPCConfig c = MPCConfig::vtnmpc();
  c.steps = 12;
  c.horizon = 0.5;
  return c;
}

TEST(OcpTest, StatesReplayThroughTheModel) {
  MPCConfig c = small_vt();
  c.cylinders = {{0.0, 0.2, 0.5}};
  const QuadState x0 = hover_state(kModel, -1.0, 0.0, 1.0);
  const QuadState goal = hover_state(kModel, 1.0, 0.0, 1.0);
  const OCPSolution s = solve_ocp(x0, [&](double) { return goal; }, 0.0, c);
  ASSERT_EQ(s.states.size(), s.inputs.size() + 1);
  const auto dt = c.timesteps();
  QuadState x = x0;
  for (std::size_t k = 0; k < s.inputs.size(); ++k) {
    x = dynamics::euler_step(x, s.inputs[k], dt[k], c.model);
    for (int i = 0; i < dynamics::kQuadStateDim; ++i) {
      EXPECT_NEAR(x[i], s.states[k + 1][i], 1e-10);
    }
  }
  for (const QuadInput& u : s.inputs) {
    for (double ui : u) {
      EXPECT_GE(ui, c.model.input_lo);
      EXPECT_LE(ui, c.model.input_hi);
    }
  }
}

TEST(OcpTest, ObjectiveMatchesReplayedStageCosts) {
  MPCConfig c = small_vt();
  c.cylinders = {{0.0, 0.0, 0.5}};
  const QuadState x0 = hover_state(kModel, -0.6, 0.0, 1.0);
  const QuadState goal = hover_state(kModel, 1.0, 0.0, 1.0);
  const Reference ref = [&](double) { return goal; };
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.3, 0.7);
  VectorXd seq(4 * c.steps);
  for (Eigen::Index i = 0; i < seq.size(); ++i) seq[i] = u(rng);
  const auto xs = predict(x0, seq, c);
  const auto dt = c.timesteps();
  MPCCostWeights about_hover;
  about_hover.u_ref = hover_input(c.model);
  double plain = 0.0;
  double shifted = 0.0;
  double t = 0.0;
  for (int k = 0; k < c.steps; ++k) {
    t += dt[static_cast<std::size_t>(k)];
    const QuadInput uk{seq[4 * k], seq[4 * k + 1], seq[4 * k + 2], seq[4 * k + 3]};
    const QuadState& x = xs[static_cast<std::size_t>(k) + 1];
    plain += mpc_cost(x, uk, goal, MPCCostWeights{});
    shifted += mpc_cost(x, uk, goal, about_hover);
    const double v = c.cylinders[0].radius * c.cylinders[0].radius * (1.0 + 0.1 * t) -
                     (x[0] * x[0] + x[1] * x[1]);
    if (v > 0.0) {
      plain += c.cylinder_penalty * v * v;
      shifted += c.cylinder_penalty * v * v;
    }
  }
  EXPECT_NEAR(ocp_objective(seq, x0, ref, 0.0, c, {}), shifted, 1e-9 * shifted);
  c.input_about_hover = false;
  EXPECT_NEAR(ocp_objective(seq, x0, ref, 0.0, c, {}), plain, 1e-9 * plain);
}

TEST(OcpTest, HoverStaysAtHover) {
  const QuadState x0 = hover_state(kModel, 0.0, 0.0, 1.0);
  for (const MPCConfig& c : {MPCConfig::vtnmpc(), MPCConfig::nmpc()}) {
    const OCPSolution s = solve_ocp(x0, [&](double) { return x0; }, 0.0, c);
    const QuadInput h = hover_input(kModel);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(s.inputs[0][i], h[i], 0.02);
  }
}

TEST(OcpTest, ConstantVariableScheduleIsNmpc) {
  MPCConfig n = MPCConfig::nmpc();
  n.steps = 40;
  n.horizon = 0.4;
  MPCConfig v = MPCConfig::vtnmpc();
  v.steps = 40;
  v.first_step = 0.01;
  v.horizon = 0.4;
  ASSERT_EQ(n.timesteps(), v.timesteps());
  const QuadState x0 = hover_state(kModel, -0.5, 0.3, 0.8);
  const QuadState goal = hover_state(kModel, 0.5, 0.0, 1.0);
  const Reference ref = [&](double) { return goal; };
  const OCPSolution a = solve_ocp(x0, ref, 0.0, n);
  const OCPSolution b = solve_ocp(x0, ref, 0.0, v);
  EXPECT_EQ(a.objective, b.objective);
  EXPECT_EQ(a.iterations, b.iterations);
  for (std::size_t k = 0; k < a.inputs.size(); ++k) EXPECT_EQ(a.inputs[k], b.inputs[k]);
}

TEST(OcpTest, WarmStartReachesTheSameOptimumFaster) {
  MPCConfig c = small_vt();
  c.solver.max_iter = 2000;
  c.solver.grad_tol = 1e-6;
  const QuadState goal = hover_state(kModel, 0.5, 0.0, 1.0);
  const Reference ref = [&](double) { return goal; };
  MPCController warm(c);
  QuadState x = hover_state(kModel, 0.0, 0.0, 1.0);
  for (int k = 0; k < 5; ++k) {
    const OCPSolution s = warm.step(x, ref, 0.01 * k);
    x = dynamics::euler_step(x, s.inputs[0], 0.01, c.model);
  }
  const OCPSolution w = warm.step(x, ref, 0.05);
  const OCPSolution cold = solve_ocp(x, ref, 0.05, c);
  ASSERT_EQ(w.status, optim::Status::kConverged);
  ASSERT_EQ(cold.status, optim::Status::kConverged);
  EXPECT_NEAR(w.objective, cold.objective, 2e-6 * std::max(1.0, cold.objective));
  EXPECT_LE(w.iterations, cold.iterations);
}

TEST(OcpTest, PenaltyWeightDrivesViolationDown) {
  const QuadState x0 = hover_state(kModel, -2.0, 0.0, 1.0);
  const QuadState goal = hover_state(kModel, 2.0, 0.0, 1.0);
  const Reference ref = [&](double) { return goal; };
  double prev = std::numeric_limits<double>::infinity();
  for (double rho : {1e1, 1e3, 1e5}) {
    MPCConfig c = MPCConfig::vtnmpc();
    c.cylinders = {{0.0, 0.2, 0.5}};
    c.cylinder_penalty = rho;
    c.solver.max_iter = 300;
    const OCPSolution s = solve_ocp(x0, ref, 0.0, c);
    const auto dt = c.timesteps();
    double worst = 0.0;
    double t = 0.0;
    for (std::size_t k = 0; k < dt.size(); ++k) {
      t += dt[k];
      const QuadState& x = s.states[k + 1];
      worst = std::max(worst, augmented_cylinder(x[0], x[1], t, c.cylinders[0], c.cylinder_slope));
    }
    EXPECT_LT(worst, prev) << "penalty " << rho;
    prev = worst;
  }
  EXPECT_LT(prev, 1e-3);
}

}  // namespace
}  // namespace dpcpsf::mpc
