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

// Closed-loop benchmark: the three tasks, the four controllers and the
// artifacts they produce.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpcpsf/dpc.hpp"
#include "dpcpsf/dynamics.hpp"
#include "dpcpsf/mpc.hpp"
#include "dpcpsf/psf.hpp"
#include "dpcpsf/safeset.hpp"

namespace dpcpsf::bench {

using dynamics::QuadInput;
using dynamics::QuadState;
using dynamics::Sub1Input;
using dynamics::Sub1State;

enum class Task { kNavigation, kTrajectory, kAdversarial };
enum class ControllerKind { kDpc, kDpcPsf, kVtnmpc, kNmpc };

const char* task_name(Task t);
const char* controller_name(ControllerKind c);
// Accepts the CLI spellings: nav, traj, adv and dpc, dpc-psf, vtnmpc, nmpc.
Task parse_task(const std::string& s);
ControllerKind parse_controller(const std::string& s);

struct Waypoint {
  double t = 0.0;
  std::array<double, 3> pos{};
};

struct Scenario {
  Task kind = Task::kNavigation;
  double duration = 5.0;  // s
  QuadState initial{};
  std::vector<CylinderConstraint> obstacles;
  std::vector<Waypoint> waypoints;
  // DPC variants track the reference this far ahead in time.
  double dpc_offset = 0.0;

  void validate() const;
};

// Hover at (-2, 0, 1), goal (2, 0, 1), cylinder between them.
Scenario navigation(const dynamics::QuadParams& p);
// Navigation start moving at `speed` straight at the cylinder axis.
Scenario adversarial(const dynamics::QuadParams& p, double speed = 2.25);
// Rectangle through (+-2, +-1.5) at 1 m altitude, one lap in `duration`.
Scenario trajectory(const dynamics::QuadParams& p, double duration = 20.0);
Scenario make_scenario(Task t, const dynamics::QuadParams& p);

// Piecewise-linear position with the segment slope as velocity; clamped to
// the endpoints with zero velocity outside the waypoint times.
Sub1State waypoint_reference(double t, const std::vector<Waypoint>& waypoints);

struct RunConfig {
  double control_period = 0.01;  // s
  double plant_step = 0.001;     // s
  double perturbation = 0.05;
  // Runs abort once the position leaves a ball of this radius.
  double divergence_radius = 50.0;
  dynamics::QuadParams model{};
  dynamics::PGains gains = dynamics::default_gains(dynamics::QuadParams{});
  psf::PSFConfig psf{};
  mpc::MPCConfig nmpc = mpc::MPCConfig::nmpc();
  mpc::MPCConfig vtnmpc = mpc::MPCConfig::vtnmpc();
  mpc::MPCCostWeights weights{};

  void validate() const;
};

struct Artifacts {
  const dpc::Policy* policy = nullptr;
  const safeset::SafeSet* safe_set = nullptr;
};

struct StepLog {
  double t = 0.0;
  QuadState x{};
  QuadInput u{};
  Sub1State ref{};
  // Commanded acceleration; zero for the MPC controllers.
  Sub1Input accel{};
  bool triggered = false;
  double objective = 0.0;
  int iterations = 0;
  double solve_us = 0.0;
  bool warning = false;
};

struct RunMetrics {
  Task task = Task::kNavigation;
  ControllerKind controller = ControllerKind::kDpc;
  std::uint64_t seed = 0;
  // +inf when a cylinder was penetrated.
  double cost = 0.0;
  double controller_time_total_s = 0.0;
  double controller_time_median_us = 0.0;
  int steps = 0;
  int triggers = 0;
  double trigger_fraction = 0.0;
  double min_clearance = 0.0;
  // Distance from the final position to the last waypoint.
  double final_error = 0.0;
  bool diverged = false;
  std::vector<StepLog> log;
  std::string csv_path;
};

// Throws std::invalid_argument when a DPC variant lacks its policy or safe set.
RunMetrics run_scenario(const Scenario& sc, ControllerKind kind, const RunConfig& cfg,
                        const Artifacts& art, std::uint64_t seed);

// Per-step columns, in order.
const std::vector<std::string>& csv_columns();
void write_run_csv(const RunMetrics& m, const std::string& path);
void write_metrics_json(const RunMetrics& m, const std::string& path);
RunMetrics read_metrics_json(const std::string& path);

// Writes table.csv and table.txt into `dir`, plus plot_<task>_<controller>_<seed>.csv
// for every run with a step log. Infinite costs print as "inf".
void emit_report(const std::vector<RunMetrics>& runs, const std::string& dir);
std::string format_table(const std::vector<RunMetrics>& runs);

}  // namespace dpcpsf::bench
