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

// Event-triggered predictive safety filter. While the state passes the
// nearest-hyperplane test of every safe set the nominal policy output is used
// as is; otherwise a short-horizon program pulls the predicted trajectory back
// toward the safe sets while staying close to the linearized policy.

#pragma once

#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "dpcpsf/autodiff.hpp"
#include "dpcpsf/dpc.hpp"
#include "dpcpsf/optim.hpp"
#include "dpcpsf/safeset.hpp"

namespace dpcpsf::psf {

using dynamics::Sub1Input;
using dynamics::Sub1State;

class ScheduleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Prediction steps that grow linearly from `first_step` so the horizon covers
// `horizon` seconds in `steps` steps.
struct HorizonSchedule {
  double first_step = 0.0;
  double horizon = 0.0;
  int steps = 0;
  std::vector<double> dt;
};

HorizonSchedule make_schedule(double first_step, double horizon, int steps);

// u(x) = u0 + J (x - x0).
struct LinearPolicy {
  Sub1Input u0{};
  Eigen::Matrix<double, 3, 6> jacobian = Eigen::Matrix<double, 3, 6>::Zero();
  Sub1State x0{};

  template <class T>
  dynamics::Sub1InputT<T> evaluate(const dynamics::Sub1StateT<T>& x) const {
    dynamics::Sub1InputT<T> u;
    for (int r = 0; r < 3; ++r) {
      T acc = (x[0] - x0[0]) * jacobian(r, 0);
      for (int c = 1; c < 6; ++c) acc = acc + (x[c] - x0[c]) * jacobian(r, c);
      u[r] = acc + u0[r];
    }
    return u;
  }
  Sub1Input evaluate(const Sub1State& x) const { return evaluate<double>(x); }
};

LinearPolicy linearize_policy(const dpc::Policy& policy, const Sub1State& x0,
                              const Sub1State& x_r);

struct PSFConfig {
  HorizonSchedule schedule = make_schedule(0.01, 2.0, 30);
  // Per-set penalty weight and margin; sets beyond the vectors use the defaults.
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  double default_alpha = 1e3;
  double default_margin = 0.05;
  std::vector<double> alpha;
  std::vector<double> margin;
  // Bounds on every filtered input; infinite entries leave that axis free.
  // Defaults to the policy's acceleration box.
  AccelBox input_box = dpc::PolicySpec{}.accel_box;
  optim::LbfgsConfig solver{};
  // Count the deviation term once per set rather than once per step.
  bool literal_sum = false;
  bool warm_start = true;

  double alpha_of(int set) const;
  double margin_of(int set) const;
  void validate() const;
};

struct FilterResult {
  Sub1Input u{};
  bool triggered = false;
  double objective = 0.0;
  int iterations = 0;
  // Set when the line search gave up; u is the best iterate found.
  bool warning = false;
  std::vector<safeset::Hyperplane> hyperplanes;
  // Whole filtered input sequence, empty when not triggered.
  Eigen::VectorXd sequence;
};

// softplus(w^T y + b + m).
template <class T>
T hyperplane_penalty(const safeset::Hyperplane& h, std::span<const T> y, double margin) {
  T acc = y[0] * h.w[0];
  for (std::size_t i = 1; i < y.size(); ++i) acc = acc + y[i] * h.w[static_cast<Eigen::Index>(i)];
  return ad::softplus(acc + (h.b + margin));
}

// Objective terms of the filter program for one input sequence (3N entries).
struct PSFObjective {
  double deviation = 0.0;
  double penalty = 0.0;
  double total() const { return deviation + penalty; }
};
PSFObjective psf_objective(const Eigen::VectorXd& inputs, const Sub1State& x0,
                           const LinearPolicy& lp,
                           const std::vector<safeset::Hyperplane>& planes,
                           const safeset::SafeSet& ss, const PSFConfig& cfg);

// Inputs produced by running the linearized policy in closed loop over the
// schedule: the zero-deviation sequence.
Eigen::VectorXd nominal_sequence(const Sub1State& x0, const LinearPolicy& lp,
                                 const HorizonSchedule& sched);

// Minimizes the filter program from `initial` (nominal_sequence when empty).
// Throws optim::ObjectiveError on a non-finite objective.
FilterResult psf_solve(const Sub1State& x0, const LinearPolicy& lp,
                       const std::vector<safeset::Hyperplane>& planes,
                       const safeset::SafeSet& ss, const PSFConfig& cfg,
                       const Eigen::VectorXd& initial = {});

// One filter call with no carried state.
FilterResult filter(const Sub1State& x0, const Sub1State& x_r, const dpc::Policy& policy,
                    const safeset::SafeSet& ss, const PSFConfig& cfg);

// Stateful filter for a closed loop: warm-starts from the previous filtered
// sequence shifted by one step.
class SafetyFilter {
 public:
  SafetyFilter(const dpc::Policy& policy, const safeset::SafeSet& ss, PSFConfig cfg);

  FilterResult step(const Sub1State& x0, const Sub1State& x_r);
  void reset() { warm_.resize(0); }
  const PSFConfig& config() const { return cfg_; }

 private:
  const dpc::Policy* policy_;
  const safeset::SafeSet* ss_;
  PSFConfig cfg_;
  Eigen::VectorXd warm_;
};

}  // namespace dpcpsf::psf
