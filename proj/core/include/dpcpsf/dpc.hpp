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

// Differentiable predictive control on the position/velocity subsystem: an MLP
// state-feedback policy trained by gradient descent through unrolled
// double-integrator rollouts, and the rollout log that later feeds the safe
// set.

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpcpsf/autodiff.hpp"
#include "dpcpsf/dynamics.hpp"
#include "dpcpsf/geometry.hpp"

namespace dpcpsf::dpc {

using dynamics::Sub1Input;
using dynamics::Sub1InputT;
using dynamics::Sub1State;
using dynamics::Sub1StateT;

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Network inputs are (x_s1 * state_scale, x_r * state_scale).
struct PolicySpec {
  std::vector<int> hidden{64, 64};
  std::array<double, 6> state_scale{1.0 / 3, 1.0 / 3, 1.0 / 3, 0.5, 0.5, 0.5};
  AccelBox accel_box{{-4.0, -4.0, -4.0}, {4.0, 4.0, 4.0}};
};

class Policy {
 public:
  static constexpr int kInputDim = 12;
  static constexpr int kOutputDim = 3;
  static constexpr int kFormatVersion = 1;

  Policy() = default;
  // Zero weights.
  explicit Policy(const PolicySpec& spec);
  // Uniform Glorot initialization of weights, zero biases.
  static Policy initialized(const PolicySpec& spec, std::uint64_t seed);

  const PolicySpec& spec() const { return spec_; }
  std::vector<int> layer_sizes() const;
  std::size_t num_weights() const { return weights_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  void set_weights(std::vector<double> w);

  // u = mid + half * tanh(z_out), so the output always lies in the box.
  template <class TW, class TX>
  auto forward(std::span<const TW> w, const Sub1StateT<TX>& x, const Sub1State& x_r) const;

  Sub1Input eval(const Sub1State& x, const Sub1State& x_r) const;
  // d u / d x_s1 with the reference held fixed.
  Eigen::Matrix<double, 3, 6> jacobian(const Sub1State& x, const Sub1State& x_r) const;

  void save_json(std::ostream& out) const;
  void save_json(const std::string& path) const;
  static Policy load_json(std::istream& in);
  static Policy load_json(const std::string& path);

 private:
  PolicySpec spec_;
  std::vector<double> weights_;
};

Sub1Input policy_eval(const Policy& policy, const Sub1State& x, const Sub1State& x_r);
Eigen::Matrix<double, 3, 6> policy_jacobian(const Policy& policy, const Sub1State& x,
                                            const Sub1State& x_r);

// Quadratic tracking cost on subsystem-1 coordinates plus one-sided quadratic
// penalties on the state box, the input box and inflated cylinders.
struct LossWeights {
  std::array<double, 6> q{30, 30, 30, 1, 1, 1};
  std::array<double, 3> r{1, 1, 1};
  StateBox state_box{{-4.5, -4.5, -1.0, -4.0, -4.0, -4.0}, {4.5, 4.5, 3.0, 4.0, 4.0, 4.0}};
  AccelBox input_box{{-4.0, -4.0, -4.0}, {4.0, 4.0, 4.0}};
  double state_penalty = 30.0;
  double input_penalty = 30.0;
  double cylinder_penalty = 1000.0;
  // Added to each cylinder's radius inside the penalty.
  double cylinder_inflation = 0.5;
  // Multiplies the loss of the final rollout row.
  double terminal_weight = 1.0;
  std::vector<CylinderConstraint> cylinders;
};

template <class T>
T tracking_cost(const Sub1StateT<T>& x, const Sub1InputT<T>& u, const Sub1State& x_r,
                const LossWeights& w) {
  T acc = (x[0] - x_r[0]) * (x[0] - x_r[0]) * w.q[0];
  for (int i = 1; i < 6; ++i) acc = acc + (x[i] - x_r[i]) * (x[i] - x_r[i]) * w.q[i];
  for (int i = 0; i < 3; ++i) acc = acc + u[i] * u[i] * w.r[i];
  return acc;
}

template <class T>
T state_penalty(const Sub1StateT<T>& x, const LossWeights& w) {
  T acc = x[0] * 0.0;
  for (int i = 0; i < 6; ++i) {
    const T above = ad::relu(x[i] - w.state_box.hi[i]);
    const T below = ad::relu(w.state_box.lo[i] - x[i]);
    acc = acc + (above * above + below * below) * w.state_penalty;
  }
  for (const auto& c : w.cylinders) {
    const T dx = x[0] - c.x;
    const T dy = x[1] - c.y;
    const T d = ad::sqrt(dx * dx + dy * dy);
    const T pen = ad::relu((c.radius + w.cylinder_inflation) - d);
    acc = acc + pen * pen * w.cylinder_penalty;
  }
  return acc;
}

template <class T>
T input_penalty(const Sub1InputT<T>& u, const LossWeights& w) {
  T acc = u[0] * 0.0;
  for (int i = 0; i < 3; ++i) {
    const T above = ad::relu(u[i] - w.input_box.hi[i]);
    const T below = ad::relu(w.input_box.lo[i] - u[i]);
    acc = acc + (above * above + below * below) * w.input_penalty;
  }
  return acc;
}

template <class T>
T dpc_loss(const Sub1StateT<T>& x, const Sub1InputT<T>& u, const Sub1State& x_r,
           const LossWeights& w) {
  return tracking_cost(x, u, x_r, w) + state_penalty(x, w) + input_penalty(u, w);
}

enum RolloutFlag : std::uint8_t {
  kStateBoxViolation = 1 << 0,
  kInputBoxViolation = 1 << 1,
  kCylinderPenetration = 1 << 2,
  kDiverged = 1 << 3,
};

// Flags that hold for a single step; recomputable from the stored data.
std::uint8_t step_flags(const Sub1State& x, const Sub1Input& u, const LossWeights& w);

struct Rollout {
  std::int32_t batch = 0;
  std::int32_t index = 0;
  // All three have N_s + 1 rows; u at row N_s is zero.
  std::vector<Sub1State> x;
  std::vector<Sub1Input> u;
  std::vector<Sub1State> x_r;
  // Row k < N_s holds the stage loss, row N_s the terminal loss.
  std::vector<double> step_loss;
  std::vector<std::uint8_t> flags;
  double total_loss = 0.0;
  double terminal_error = 0.0;
  bool diverged = false;

  std::uint8_t any_flags() const;
};

// Closed-loop unroll of the policy on sub1_step. The reference must have
// N_s + 1 rows. Stops early (flagged diverged) when the state turns
// non-finite. When `gradient` is given it receives d total_loss / d weights;
// `scratch` lets callers reuse tape storage across rollouts.
Rollout rollout(const Policy& policy, const Sub1State& x0,
                const std::vector<Sub1State>& reference, double dt, const LossWeights& w,
                Eigen::VectorXd* gradient = nullptr, ad::Tape* scratch = nullptr);

// Start/goal pair around which extra tasks are drawn.
struct TaskAnchor {
  std::array<double, 3> start{};
  std::array<double, 3> goal{};
};

struct SamplingConfig {
  // Initial states and reference points.
  StateBox initial{{-3.0, -3.0, 0.0, -2.0, -2.0, -2.0}, {3.0, 3.0, 2.0, 2.0, 2.0, 2.0}};
  // Fraction of references that are static points; the rest move along a
  // straight segment and then hold.
  double static_fraction = 0.5;
  double max_reference_speed = 1.0;
  // Samples closer than this to a cylinder surface are redrawn.
  double cylinder_clearance = 0.3;
  // Redraw tasks whose straight line from x0 to the first reference point
  // passes closer than cylinder_clearance to a cylinder.
  bool clear_approach = true;
  // A fraction of tasks start near an anchor's start (position jitter, small
  // velocity) and hold a point near its goal.
  std::vector<TaskAnchor> anchors;
  double anchor_fraction = 0.2;
  double anchor_jitter = 0.15;
  double anchor_speed = 0.5;
};

std::vector<Sub1State> segment_reference(const Sub1State& start, const Sub1State& end,
                                         double speed, int n_steps, double dt);

struct TrainConfig {
  int rollouts_per_batch = 16;
  int steps_per_rollout = 240;
  int batches = 900;
  double dt = 0.025;
  double learning_rate = 1e-2;
  double lr_decay = 0.996;  // multiplicative, per batch
  // Adam moment decays.
  double momentum = 0.9;
  double rms_decay = 0.999;
  double rms_epsilon = 1e-8;
  double grad_tolerance = 1e-4;
  int max_retries = 5;
  std::uint64_t seed = 7;
  PolicySpec policy;
  LossWeights loss;
  SamplingConfig sampling;

  void validate() const;
};

struct BatchStats {
  int batch = 0;
  double mean_loss = 0.0;
  double grad_norm = 0.0;
  double learning_rate = 0.0;
  int retries = 0;
};

struct RolloutStore {
  std::vector<Rollout> rollouts;
  std::vector<BatchStats> batches;

  std::size_t size() const { return rollouts.size(); }
  // Rollouts of the last recorded batch.
  std::vector<const Rollout*> final_batch() const;

  // One row per step: batch, rollout, k, x_s1[6], u_s1[3], x_r[6], flags.
  void write_csv(std::ostream& out) const;
  void write_csv(const std::string& path) const;
  static RolloutStore read_csv(std::istream& in);
  static RolloutStore read_csv(const std::string& path);
};

struct TrainResult {
  Policy policy;
  RolloutStore store;
  bool converged = false;
};

using BatchCallback = std::function<void(const BatchStats&)>;
TrainResult train(const TrainConfig& cfg, const BatchCallback& on_batch = nullptr);

// Draws one (x0, reference) pair.
std::pair<Sub1State, std::vector<Sub1State>> sample_task(const TrainConfig& cfg,
                                                         std::mt19937_64& rng);

// ---------------------------------------------------------------------------

template <class TW, class TX>
auto Policy::forward(std::span<const TW> w, const Sub1StateT<TX>& x,
                     const Sub1State& x_r) const {
  using R = std::conditional_t<ad::is_var_v<TW> || ad::is_var_v<TX>, ad::Var, double>;
  if (w.size() != weights_.size()) throw std::invalid_argument("Policy: weight count mismatch");

  std::vector<TX> in(kInputDim);
  for (int i = 0; i < 6; ++i) in[i] = x[i] * spec_.state_scale[i];
  for (int i = 0; i < 6; ++i) {
    const double r = x_r[i] * spec_.state_scale[i];
    if constexpr (ad::is_var_v<TX>) {
      in[6 + i] = x[0].tape()->variable(r);
    } else {
      in[6 + i] = r;
    }
  }

  const std::vector<int> sizes = layer_sizes();
  std::size_t off = 0;
  std::vector<R> act;
  Sub1InputT<R> out;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int n_in = sizes[l];
    const int n_out = sizes[l + 1];
    const bool last = l + 2 == sizes.size();
    std::vector<R> next(n_out);
    for (int i = 0; i < n_out; ++i) {
      const std::span<const TW> row = w.subspan(off + static_cast<std::size_t>(i) * n_in, n_in);
      const TW& bias = w[off + static_cast<std::size_t>(n_out) * n_in + i];
      R z;
      if (l == 0) {
        z = ad::dot(row, std::span<const TX>(in), bias);
      } else {
        z = ad::dot(row, std::span<const R>(act), bias);
      }
      next[i] = ad::tanh(z);
    }
    off += static_cast<std::size_t>(n_out) * n_in + n_out;
    if (last) {
      for (int i = 0; i < kOutputDim; ++i) {
        const double mid = 0.5 * (spec_.accel_box.hi[i] + spec_.accel_box.lo[i]);
        const double half = 0.5 * (spec_.accel_box.hi[i] - spec_.accel_box.lo[i]);
        out[i] = next[i] * half + mid;
      }
    }
    act = std::move(next);
  }
  return out;
}

}  // namespace dpcpsf::dpc
