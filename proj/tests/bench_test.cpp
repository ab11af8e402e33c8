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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

namespace dpcpsf::bench {
namespace {

namespace fs = std::filesystem;

const dynamics::QuadParams kModel{};

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("dpcpsf_bench_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

const dpc::Policy& small_policy() {
  static const dpc::Policy p = [] {
    dpc::PolicySpec spec;
    spec.hidden = {8};
    return dpc::Policy::initialized(spec, 5);
  }();
  return p;
}

const safeset::SafeSet& small_set() {
  static const safeset::SafeSet ss = [] {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const CylinderConstraint cyl{0.0, 0.2, 0.5};
    std::vector<Sub1State> pts;
    while (pts.size() < 400) {
      Sub1State x{3 * u(rng), 3 * u(rng), 1 + 0.5 * u(rng), u(rng), u(rng), 0.5 * u(rng)};
      if (cyl.clearance(x[0], x[1]) > 0.05) pts.push_back(x);
    }
    dpc::LossWeights w;
    w.cylinders.push_back(cyl);
    safeset::BuildConfig bc;
    bc.robustness = 0.1;
    return safeset::build_safe_set(pts, safeset::constraints_of(w), bc);
  }();
  return ss;
}

Artifacts artifacts() { return {&small_policy(), &small_set()}; }

Scenario short_nav(double duration) {
  Scenario s = navigation(kModel);
  s.duration = duration;
  return s;
}

RunMetrics fake_run(Task t, ControllerKind c, double cost) {
  RunMetrics m;
  m.task = t;
  m.controller = c;
  m.seed = 3;
  m.cost = cost;
  m.controller_time_total_s = 0.25;
  m.controller_time_median_us = 12.5;
  m.steps = 500;
  m.triggers = 7;
  m.trigger_fraction = 7.0 / 500;
  m.min_clearance = 0.4;
  m.final_error = 0.05;
  return m;
}

TEST(NamesTest, RoundTrip) {
  for (Task t : {Task::kNavigation, Task::kTrajectory, Task::kAdversarial}) {
    EXPECT_EQ(parse_task(task_name(t)), t);
  }
  for (ControllerKind c : {ControllerKind::kDpc, ControllerKind::kDpcPsf, ControllerKind::kVtnmpc,
                           ControllerKind::kNmpc}) {
    EXPECT_EQ(parse_controller(controller_name(c)), c);
  }
  EXPECT_THROW(parse_task("navigation"), std::invalid_argument);
  EXPECT_THROW(parse_controller("mpc"), std::invalid_argument);
}

TEST(WaypointTest, ExactAtWaypoints) {
  const Scenario s = trajectory(kModel, 20.0);
  for (const Waypoint& w : s.waypoints) {
    const Sub1State r = waypoint_reference(w.t, s.waypoints);
    for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(r[i], w.pos[i]);
  }
}

TEST(WaypointTest, MidpointIsMean) {
  const std::vector<Waypoint> wp{{1.0, {0.0, 2.0, 1.0}}, {3.0, {4.0, -2.0, 2.0}}};
  const Sub1State r = waypoint_reference(2.0, wp);
  EXPECT_DOUBLE_EQ(r[0], 2.0);
  EXPECT_DOUBLE_EQ(r[1], 0.0);
  EXPECT_DOUBLE_EQ(r[2], 1.5);
}

TEST(WaypointTest, VelocityIsSegmentSlope) {
  const std::vector<Waypoint> wp{{0.0, {0.0, 0.0, 1.0}}, {2.0, {4.0, -2.0, 1.0}},
                                 {3.0, {4.0, -2.0, 3.0}}};
  const Sub1State a = waypoint_reference(0.7, wp);
  EXPECT_DOUBLE_EQ(a[3], 2.0);
  EXPECT_DOUBLE_EQ(a[4], -1.0);
  EXPECT_DOUBLE_EQ(a[5], 0.0);
  const Sub1State b = waypoint_reference(2.5, wp);
  EXPECT_DOUBLE_EQ(b[3], 0.0);
  EXPECT_DOUBLE_EQ(b[5], 2.0);
}

TEST(WaypointTest, ClampsOutsideRange) {
  const std::vector<Waypoint> wp{{1.0, {0.0, 0.0, 1.0}}, {2.0, {1.0, 1.0, 1.0}}};
  const Sub1State before = waypoint_reference(-5.0, wp);
  const Sub1State after = waypoint_reference(9.0, wp);
  EXPECT_EQ(before, (Sub1State{0.0, 0.0, 1.0, 0.0, 0.0, 0.0}));
  EXPECT_EQ(after, (Sub1State{1.0, 1.0, 1.0, 0.0, 0.0, 0.0}));
  EXPECT_THROW(waypoint_reference(0.0, {}), std::invalid_argument);
}

TEST(ScenarioTest, Defaults) {
  const Scenario nav = navigation(kModel);
  const Scenario adv = adversarial(kModel);
  const Scenario traj = trajectory(kModel);
  EXPECT_DOUBLE_EQ(nav.duration, 5.0);
  EXPECT_DOUBLE_EQ(adv.duration, 10.0);
  EXPECT_DOUBLE_EQ(traj.duration, 20.0);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(adv.initial[i], nav.initial[i]);
  const double speed = std::hypot(adv.initial[dynamics::kVx], adv.initial[dynamics::kVy]);
  EXPECT_NEAR(speed, 2.25, 1e-12);
  // Velocity points at the cylinder axis.
  const CylinderConstraint& c = adv.obstacles.at(0);
  const double cross = (c.x - adv.initial[0]) * adv.initial[dynamics::kVy] -
                       (c.y - adv.initial[1]) * adv.initial[dynamics::kVx];
  EXPECT_NEAR(cross, 0.0, 1e-12);
  EXPECT_GT(traj.dpc_offset, 0.0);
  nav.validate();
  adv.validate();
  traj.validate();
}

TEST(ScenarioTest, Validation) {
  Scenario s = navigation(kModel);
  s.duration = 0.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = navigation(kModel);
  s.waypoints.clear();
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = trajectory(kModel);
  s.waypoints[2].t = s.waypoints[1].t;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(RunTest, MissingArtifactsThrow) {
  const Scenario s = short_nav(0.1);
  const RunConfig cfg;
  EXPECT_THROW(run_scenario(s, ControllerKind::kDpc, cfg, {}, 1), std::invalid_argument);
  EXPECT_THROW(run_scenario(s, ControllerKind::kDpcPsf, cfg, {&small_policy(), nullptr}, 1),
               std::invalid_argument);
  EXPECT_NO_THROW(run_scenario(s, ControllerKind::kDpc, cfg, {&small_policy(), nullptr}, 1));
}

TEST(RunTest, RowCountMatchesDuration) {
  const RunConfig cfg;
  const RunMetrics m = run_scenario(short_nav(0.5), ControllerKind::kDpc, cfg, artifacts(), 1);
  ASSERT_FALSE(m.diverged);
  EXPECT_EQ(m.steps, 50);
  EXPECT_EQ(m.log.size(), 50u);
  const fs::path d = scratch_dir("rows");
  write_run_csv(m, (d / "run.csv").string());
  const auto lines = read_lines(d / "run.csv");
  ASSERT_EQ(lines.size(), 51u);
  std::ostringstream header;
  for (std::size_t i = 0; i < csv_columns().size(); ++i) {
    header << (i ? "," : "") << csv_columns()[i];
  }
  EXPECT_EQ(lines[0], header.str());
  EXPECT_EQ(std::count(lines[1].begin(), lines[1].end(), ','),
            static_cast<long>(csv_columns().size() - 1));
}

void expect_same_run(const RunMetrics& a, const RunMetrics& b) {
  EXPECT_EQ(a.cost, b.cost);
  EXPECT_EQ(a.steps, b.steps);
  EXPECT_EQ(a.triggers, b.triggers);
  EXPECT_EQ(a.min_clearance, b.min_clearance);
  EXPECT_EQ(a.final_error, b.final_error);
  EXPECT_EQ(a.diverged, b.diverged);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t k = 0; k < a.log.size(); ++k) {
    EXPECT_EQ(a.log[k].x, b.log[k].x);
    EXPECT_EQ(a.log[k].u, b.log[k].u);
  }
}

TEST(RunTest, DeterministicForFixedSeed) {
  const RunConfig cfg;
  for (ControllerKind c : {ControllerKind::kDpc, ControllerKind::kDpcPsf}) {
    const RunMetrics a = run_scenario(short_nav(0.5), c, cfg, artifacts(), 4);
    const RunMetrics b = run_scenario(short_nav(0.5), c, cfg, artifacts(), 4);
    expect_same_run(a, b);
  }
  RunConfig mc;
  mc.vtnmpc.solver.max_iter = 5;
  const RunMetrics a = run_scenario(short_nav(0.05), ControllerKind::kVtnmpc, mc, {}, 4);
  const RunMetrics b = run_scenario(short_nav(0.05), ControllerKind::kVtnmpc, mc, {}, 4);
  expect_same_run(a, b);
}

TEST(RunTest, SeedChangesThePlant) {
  const RunConfig cfg;
  const RunMetrics a = run_scenario(short_nav(0.5), ControllerKind::kDpc, cfg, artifacts(), 1);
  const RunMetrics b = run_scenario(short_nav(0.5), ControllerKind::kDpc, cfg, artifacts(), 2);
  EXPECT_NE(a.log.back().x, b.log.back().x);
}

TEST(RunTest, MetricsInvariants) {
  const RunConfig cfg;
  const RunMetrics m = run_scenario(short_nav(0.5), ControllerKind::kDpcPsf, cfg, artifacts(), 1);
  EXPECT_GE(m.trigger_fraction, 0.0);
  EXPECT_LE(m.trigger_fraction, 1.0);
  EXPECT_TRUE(std::isfinite(m.min_clearance));
  EXPECT_GE(m.controller_time_total_s, 0.0);
  EXPECT_EQ(m.task, Task::kNavigation);
  EXPECT_EQ(m.controller, ControllerKind::kDpcPsf);
}

TEST(RunTest, PenetrationGivesInfiniteCost) {
  // Start inside the cylinder.
  Scenario s = short_nav(0.1);
  s.initial = dynamics::hover_state(kModel, 0.0, 0.2, 1.0);
  s.initial[dynamics::kX] = 0.1;
  const RunMetrics m = run_scenario(s, ControllerKind::kDpc, RunConfig{}, artifacts(), 1);
  EXPECT_TRUE(std::isinf(m.cost));
  EXPECT_LT(m.min_clearance, 0.0);
}

TEST(RunTest, DivergenceAbortsWithPartialLog) {
  RunConfig cfg;
  cfg.divergence_radius = 2.1;
  // Hovering at 2.2 m from the origin already lies outside the ball.
  const RunMetrics m = run_scenario(short_nav(0.5), ControllerKind::kDpc, cfg, artifacts(), 1);
  EXPECT_TRUE(m.diverged);
  EXPECT_LT(m.steps, 50);
  EXPECT_TRUE(std::isinf(m.cost));
}

TEST(MetricsJsonTest, RoundTrip) {
  const fs::path d = scratch_dir("json");
  for (double cost : {123.456, std::numeric_limits<double>::infinity()}) {
    RunMetrics m = fake_run(Task::kAdversarial, ControllerKind::kDpcPsf, cost);
    m.csv_path = "run.csv";
    write_metrics_json(m, (d / "m.json").string());
    const RunMetrics r = read_metrics_json((d / "m.json").string());
    EXPECT_EQ(r.task, m.task);
    EXPECT_EQ(r.controller, m.controller);
    EXPECT_EQ(r.seed, m.seed);
    EXPECT_EQ(r.cost, m.cost);
    EXPECT_EQ(r.steps, m.steps);
    EXPECT_EQ(r.triggers, m.triggers);
    EXPECT_DOUBLE_EQ(r.trigger_fraction, m.trigger_fraction);
    EXPECT_DOUBLE_EQ(r.min_clearance, m.min_clearance);
    EXPECT_EQ(r.csv_path, m.csv_path);
  }
  std::ofstream(d / "bad.json") << "{\"schema\": \"other\"}";
  EXPECT_THROW(read_metrics_json((d / "bad.json").string()), std::runtime_error);
}

TEST(ReportTest, EmptyListIsHeaderOnly) {
  const fs::path d = scratch_dir("empty");
  emit_report({}, d.string());
  const auto csv = read_lines(d / "table.csv");
  ASSERT_EQ(csv.size(), 1u);
  EXPECT_EQ(csv[0].rfind("task,controller,seed,cost", 0), 0u);
  EXPECT_EQ(read_lines(d / "table.txt").size(), 2u);  // header and rule
}

TEST(ReportTest, TwelveRowsAndInfLiteral) {
  std::vector<RunMetrics> runs;
  for (Task t : {Task::kNavigation, Task::kTrajectory, Task::kAdversarial}) {
    for (ControllerKind c : {ControllerKind::kDpc, ControllerKind::kDpcPsf,
                             ControllerKind::kVtnmpc, ControllerKind::kNmpc}) {
      const bool hit = t == Task::kAdversarial && c == ControllerKind::kDpc;
      runs.push_back(fake_run(t, c, hit ? std::numeric_limits<double>::infinity() : 10.0));
    }
  }
  const fs::path d = scratch_dir("twelve");
  emit_report(runs, d.string());
  const auto csv = read_lines(d / "table.csv");
  ASSERT_EQ(csv.size(), 13u);
  EXPECT_EQ(csv[9].rfind("adv,dpc,3,inf,", 0), 0u) << csv[9];
  EXPECT_EQ(csv[1].rfind("nav,dpc,3,10.00,", 0), 0u) << csv[1];
  EXPECT_NE(format_table(runs).find(" inf "), std::string::npos);
  EXPECT_EQ(read_lines(d / "table.txt").size(), 14u);
}

TEST(ReportTest, WritesPlotDataForLoggedRuns) {
  const RunMetrics m = run_scenario(short_nav(0.2), ControllerKind::kDpc, RunConfig{}, artifacts(), 1);
  const fs::path d = scratch_dir("plot");
  emit_report({m}, d.string());
  const auto lines = read_lines(d / "plot_nav_dpc_1.csv");
  ASSERT_EQ(lines.size(), m.log.size() + 1);
  EXPECT_EQ(lines[0], "t,x,y,z,ref_x,ref_y,ref_z");
}

TEST(ReportTest, UnwritablePathThrows) {
  const fs::path d = scratch_dir("unwritable");
  std::ofstream(d / "file") << "x";
  EXPECT_ANY_THROW(emit_report({}, (d / "file" / "sub").string()));
}

}  // namespace
}  // namespace dpcpsf::bench
