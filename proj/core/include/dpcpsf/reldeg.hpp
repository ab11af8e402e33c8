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

// Numeric vector relative degree of a discrete-time system, the step count at
// which the input's influence chain breaks down, and the resulting
// decomposition into an outer (output-side) subsystem and an inner one.
//
// Everything is decided from sampled Jacobian sparsity: a derivative of a
// quantity j steps ahead is "nonzero" when its norm divided by dt^j exceeds
// the tolerance, which keeps the test independent of the step size.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpcpsf/autodiff.hpp"
#include "dpcpsf/dynamics.hpp"

namespace dpcpsf::reldeg {

class RelativeDegreeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// How the backward influence test decides that y_i[k+j] no longer depends on
// the state.
enum class VanishingTest {
  // Row norm over the states that the input reaches within the remaining
  // steps of the chain.
  kDownstreamRowNorm,
  // Row norm over every state.
  kFullRowNorm,
};

struct Probe {
  std::vector<double> state;
  std::vector<double> input;
};

using StepFn = std::function<std::vector<ad::Var>(std::span<const ad::Var> x,
                                                  std::span<const ad::Var> u)>;
using ProbeSampler = std::function<Probe(std::uint64_t index, std::uint64_t seed)>;

struct SystemSpec {
  std::vector<std::string> state_names;
  std::vector<std::string> input_names;
  // Outputs are the states at these indices.
  std::vector<int> output_indices;
  StepFn step;
  ProbeSampler sample_probe;
  std::vector<Probe> structured_probes;
  double dt = 1e-3;
  double tolerance = 1e-8;
  VanishingTest vanishing_test = VanishingTest::kDownstreamRowNorm;
  std::uint64_t seed = 1;

  void validate() const;
  std::vector<std::string> output_names() const;
};

struct VRDResult {
  std::vector<int> r;
  std::vector<bool> well_defined;
  // For each output, a probe state where the gradient at step r vanished
  // (empty when well defined).
  std::vector<std::vector<double>> witnesses;
};

struct VRDReport {
  std::vector<std::string> outputs;
  std::vector<int> r;
  std::vector<bool> well_defined;
  std::vector<int> delta;
  std::vector<std::vector<double>> witnesses;
  int probes = 0;
};

struct Decomposition {
  std::vector<std::string> x_s1;
  // Input names of subsystem 1: virtual inputs (states of x_s1 driven by the
  // inner states, renamed as their derivative) followed by real inputs that
  // reach the outputs directly.
  std::vector<std::string> u_s1;
  std::vector<std::string> x_s2;
  std::vector<std::string> u_s2;
  // Inner states that reach y[k + r_min] without passing through x_s1.
  std::vector<std::string> u_s1_state_part;
  std::vector<std::string> u_s1_input_part;
  // x_s2 minus u_s1_state_part; with x_s1 and u_s1_state_part this partitions
  // the state names.
  std::vector<std::string> x_s2_remainder;
  int r_min = 0;
};

// Structured probes first, then `n_probes` sampled ones.
std::vector<Probe> probe_set(const SystemSpec& sys, int n_probes);

VRDResult compute_vrd(const SystemSpec& sys, int n_probes, int j_max);
std::vector<int> compute_delta(const SystemSpec& sys, const VRDResult& vrd, int n_probes);
VRDReport analyze(const SystemSpec& sys, int n_probes, int j_max);
Decomposition decompose(const SystemSpec& sys, const std::vector<int>& delta,
                        int n_probes = 32);

// Shipped systems.
SystemSpec quad_system(const dynamics::QuadParams& p, double dt = 1e-3);
SystemSpec sub1_system(double dt = 1e-3);
SystemSpec single_integrator_system(double dt = 1e-3);

}  // namespace dpcpsf::reldeg
