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

// Limited-memory BFGS with Armijo backtracking, used by the safety filter and
// the MPC baselines.

#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace dpcpsf::optim {

class ObjectiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Returns f(x); writes the gradient into *grad when it is non-null.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct LbfgsConfig {
  int max_iter = 50;
  // Stop once the max-norm of the gradient drops below this.
  double grad_tol = 1e-6;
  int memory = 8;
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 40;

  void validate() const;
};

enum class Status { kConverged, kMaxIterations, kLineSearchFailed };

const char* status_name(Status s);

struct MinimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  Status status = Status::kMaxIterations;
  // Objective after each accepted step, starting with f(x0).
  std::vector<double> history;
};

// Throws ObjectiveError when f(x0) or its gradient is not finite. Trial points
// with non-finite values are rejected by the line search.
MinimizeResult minimize(const Objective& f, Eigen::VectorXd x0, const LbfgsConfig& cfg = {});

// Box-constrained variant: iterates are projected onto [lower, upper] and the
// quasi-Newton step acts on the variables not held at a bound. Convergence is
// judged on the projected gradient.
MinimizeResult minimize(const Objective& f, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                        const Eigen::VectorXd& upper, const LbfgsConfig& cfg = {});

}  // namespace dpcpsf::optim
