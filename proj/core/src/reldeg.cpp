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

#include "dpcpsf/reldeg.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace dpcpsf::reldeg {
namespace {

// Derivatives of x[k+j] with respect to u[k] and x[k] for j = 0..lags, with
// inputs after step k held at the probe input.
struct Sensitivities {
  std::vector<Eigen::MatrixXd> du;
  std::vector<Eigen::MatrixXd> dx;
};

Sensitivities sensitivities(const SystemSpec& sys, const Probe& probe, int lags) {
  const int n = static_cast<int>(sys.state_names.size());
  const int m = static_cast<int>(sys.input_names.size());
  ad::Tape tape;
  const std::vector<ad::Var> x0 = tape.variables(probe.state);
  const std::vector<ad::Var> u0 = tape.variables(probe.input);
  const std::vector<std::uint32_t> x_idx = [&] {
    std::vector<std::uint32_t> v;
    for (const auto& x : x0) v.push_back(x.index());
    return v;
  }();

  std::vector<std::vector<ad::Var>> traj{x0};
  for (int j = 1; j <= lags; ++j) {
    const std::vector<ad::Var> u = j == 1 ? u0 : tape.variables(probe.input);
    traj.push_back(sys.step(traj.back(), u));
    if (static_cast<int>(traj.back().size()) != n) {
      throw std::invalid_argument("SystemSpec: step returned wrong state dimension");
    }
  }

  Sensitivities s;
  s.du.push_back(Eigen::MatrixXd::Zero(n, m));
  s.dx.push_back(Eigen::MatrixXd::Identity(n, n));
  std::vector<double> adj;
  for (int j = 1; j <= lags; ++j) {
    Eigen::MatrixXd du(n, m);
    Eigen::MatrixXd dx(n, n);
    for (int a = 0; a < n; ++a) {
      tape.adjoints(traj[j][a], adj);
      for (int b = 0; b < m; ++b) du(a, b) = adj[u0[b].index()];
      for (int b = 0; b < n; ++b) dx(a, b) = adj[x_idx[b]];
    }
    s.du.push_back(std::move(du));
    s.dx.push_back(std::move(dx));
  }
  return s;
}

std::vector<Sensitivities> all_sensitivities(const SystemSpec& sys,
                                             const std::vector<Probe>& probes, int lags) {
  std::vector<Sensitivities> out;
  out.reserve(probes.size());
  for (const auto& p : probes) out.push_back(sensitivities(sys, p, lags));
  return out;
}

bool nonzero(const SystemSpec& sys, double norm, int lag) {
  return norm / std::pow(sys.dt, lag) > sys.tolerance;
}

std::string derivative_name(const std::string& state) {
  const std::string suffix = "dot";
  if (state.size() > suffix.size() &&
      state.compare(state.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return state.substr(0, state.size() - suffix.size()) + "ddot";
  }
  return state + "dot";
}

template <std::size_t N>
std::array<ad::Var, N> to_array(std::span<const ad::Var> v) {
  std::array<ad::Var, N> a;
  std::copy(v.begin(), v.end(), a.begin());
  return a;
}

std::mt19937_64 probe_rng(std::uint64_t index, std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

void SystemSpec::validate() const {
  if (state_names.empty() || input_names.empty() || output_indices.empty()) {
    throw std::invalid_argument("SystemSpec: n, m and l must be at least 1");
  }
  auto unique = [](const std::vector<std::string>& v) {
    return std::set<std::string>(v.begin(), v.end()).size() == v.size();
  };
  if (!unique(state_names) || !unique(input_names)) {
    throw std::invalid_argument("SystemSpec: names must be unique");
  }
  for (int i : output_indices) {
    if (i < 0 || i >= static_cast<int>(state_names.size())) {
      throw std::invalid_argument("SystemSpec: output index out of range");
    }
  }
  if (!step || !sample_probe) throw std::invalid_argument("SystemSpec: missing callbacks");
  if (!(dt > 0.0) || !(tolerance > 0.0)) {
    throw std::invalid_argument("SystemSpec: dt and tolerance must be positive");
  }
}

std::vector<std::string> SystemSpec::output_names() const {
  std::vector<std::string> out;
  for (int i : output_indices) out.push_back(state_names[i]);
  return out;
}

std::vector<Probe> probe_set(const SystemSpec& sys, int n_probes) {
  if (n_probes < 1) throw std::invalid_argument("probe_set: n_probes must be >= 1");
  std::vector<Probe> probes = sys.structured_probes;
  for (int i = 0; i < n_probes; ++i) {
    probes.push_back(sys.sample_probe(static_cast<std::uint64_t>(i), sys.seed));
  }
  for (const auto& p : probes) {
    if (p.state.size() != sys.state_names.size() || p.input.size() != sys.input_names.size()) {
      throw std::invalid_argument("probe_set: probe has wrong dimension");
    }
  }
  return probes;
}

VRDResult compute_vrd(const SystemSpec& sys, int n_probes, int j_max) {
  sys.validate();
  if (j_max < 1) throw std::invalid_argument("compute_vrd: j_max must be >= 1");
  const std::vector<Probe> probes = probe_set(sys, n_probes);
  const std::vector<Sensitivities> sens = all_sensitivities(sys, probes, j_max);

  VRDResult res;
  for (int out : sys.output_indices) {
    int r = 0;
    for (int j = 1; j <= j_max && r == 0; ++j) {
      for (const auto& s : sens) {
        if (nonzero(sys, s.du[j].row(out).norm(), j)) {
          r = j;
          break;
        }
      }
    }
    if (r == 0) {
      throw RelativeDegreeError("relative degree exceeds horizon for output " +
                                sys.state_names[out] + " (j_max = " + std::to_string(j_max) +
                                ")");
    }
    bool all = true;
    std::vector<double> witness;
    for (std::size_t p = 0; p < sens.size(); ++p) {
      if (!nonzero(sys, sens[p].du[r].row(out).norm(), r)) {
        all = false;
        witness = probes[p].state;
        break;
      }
    }
    res.r.push_back(r);
    res.well_defined.push_back(all);
    res.witnesses.push_back(std::move(witness));
  }
  return res;
}

std::vector<int> compute_delta(const SystemSpec& sys, const VRDResult& vrd, int n_probes) {
  sys.validate();
  const int n = static_cast<int>(sys.state_names.size());
  const int r_max = *std::max_element(vrd.r.begin(), vrd.r.end());
  const std::vector<Probe> probes = probe_set(sys, n_probes);
  const std::vector<Sensitivities> sens = all_sensitivities(sys, probes, r_max);

  // reached[m][a]: the input reaches state a in m steps at some probe.
  std::vector<std::vector<bool>> reached(r_max + 1, std::vector<bool>(n, false));
  for (int m = 1; m <= r_max; ++m) {
    for (int a = 0; a < n; ++a) {
      for (const auto& s : sens) {
        if (nonzero(sys, s.du[m].row(a).norm(), m)) {
          reached[m][a] = true;
          break;
        }
      }
    }
  }

  std::vector<int> delta;
  for (std::size_t i = 0; i < sys.output_indices.size(); ++i) {
    const int out = sys.output_indices[i];
    const int r = vrd.r[i];
    if (vrd.well_defined[i]) {
      delta.push_back(r);
      continue;
    }
    int d = r;
    for (int j = 1; j < r && d == r; ++j) {
      for (const auto& s : sens) {
        double sq = 0.0;
        for (int a = 0; a < n; ++a) {
          const bool keep =
              sys.vanishing_test == VanishingTest::kFullRowNorm || reached[r - j][a];
          if (keep) sq += s.dx[j](out, a) * s.dx[j](out, a);
        }
        if (!nonzero(sys, std::sqrt(sq), j)) {
          d = j;
          break;
        }
      }
    }
    delta.push_back(d);
  }
  return delta;
}

VRDReport analyze(const SystemSpec& sys, int n_probes, int j_max) {
  const VRDResult vrd = compute_vrd(sys, n_probes, j_max);
  VRDReport rep;
  rep.outputs = sys.output_names();
  rep.r = vrd.r;
  rep.well_defined = vrd.well_defined;
  rep.witnesses = vrd.witnesses;
  rep.delta = compute_delta(sys, vrd, n_probes);
  rep.probes = static_cast<int>(sys.structured_probes.size()) + n_probes;
  return rep;
}

Decomposition decompose(const SystemSpec& sys, const std::vector<int>& delta, int n_probes) {
  sys.validate();
  if (delta.size() != sys.output_indices.size()) {
    throw std::invalid_argument("decompose: delta size does not match outputs");
  }
  const int n = static_cast<int>(sys.state_names.size());
  const int m = static_cast<int>(sys.input_names.size());
  const int r_min = *std::min_element(delta.begin(), delta.end());
  if (r_min < 1) throw std::invalid_argument("decompose: delta entries must be >= 1");
  const std::vector<Probe> probes = probe_set(sys, n_probes);
  const std::vector<Sensitivities> sens = all_sensitivities(sys, probes, r_min);

  auto state_hits = [&](int lag, int a) {
    for (const auto& s : sens) {
      for (int out : sys.output_indices) {
        if (nonzero(sys, std::abs(s.dx[lag](out, a)), lag)) return true;
      }
    }
    return false;
  };

  std::vector<bool> in_s1(n, false);
  for (int a = 0; a < n; ++a) {
    for (int j = 0; j < r_min && !in_s1[a]; ++j) in_s1[a] = state_hits(j, a);
  }
  Decomposition d;
  d.r_min = r_min;
  for (int a = 0; a < n; ++a) {
    if (in_s1[a]) d.x_s1.push_back(sys.state_names[a]);
  }
  if (d.x_s1.empty()) {
    throw RelativeDegreeError("malformed output map: subsystem 1 has no states");
  }

  std::vector<bool> state_part(n, false);
  for (int a = 0; a < n; ++a) {
    if (!in_s1[a]) state_part[a] = state_hits(r_min, a);
  }
  std::vector<bool> input_part(m, false);
  for (int b = 0; b < m; ++b) {
    for (const auto& s : sens) {
      for (int out : sys.output_indices) {
        if (nonzero(sys, std::abs(s.du[r_min](out, b)), r_min)) input_part[b] = true;
      }
    }
  }

  // States of subsystem 1 whose one-step update is driven by the inner states.
  for (int a = 0; a < n; ++a) {
    if (!in_s1[a]) continue;
    bool driven = false;
    for (const auto& s : sens) {
      for (int c = 0; c < n && !driven; ++c) {
        if (state_part[c] && nonzero(sys, std::abs(s.dx[1](a, c)), 1)) driven = true;
      }
      if (driven) break;
    }
    if (driven) d.u_s1.push_back(derivative_name(sys.state_names[a]));
  }
  for (int b = 0; b < m; ++b) {
    if (input_part[b]) {
      d.u_s1.push_back(sys.input_names[b]);
      d.u_s1_input_part.push_back(sys.input_names[b]);
    } else {
      d.u_s2.push_back(sys.input_names[b]);
    }
  }
  for (int a = 0; a < n; ++a) {
    if (in_s1[a]) continue;
    d.x_s2.push_back(sys.state_names[a]);
    if (state_part[a]) {
      d.u_s1_state_part.push_back(sys.state_names[a]);
    } else {
      d.x_s2_remainder.push_back(sys.state_names[a]);
    }
  }
  return d;
}

SystemSpec quad_system(const dynamics::QuadParams& p, double dt) {
  using namespace dynamics;
  p.validate();
  SystemSpec sys;
  sys.state_names = {"x",  "y",  "z",    "q0",   "q1",   "q2", "q3", "xdot", "ydot",
                     "zdot", "p", "q", "r", "w1", "w2", "w3", "w4"};
  sys.input_names = {"u1", "u2", "u3", "u4"};
  sys.output_indices = {kX, kY, kZ};
  sys.dt = dt;
  sys.step = [p, dt](std::span<const ad::Var> x, std::span<const ad::Var> u) {
    const auto s = euler_step(to_array<kQuadStateDim>(x), to_array<kQuadInputDim>(u), dt, p);
    return std::vector<ad::Var>(s.begin(), s.end());
  };
  sys.sample_probe = [p](std::uint64_t index, std::uint64_t seed) {
    std::mt19937_64 rng = probe_rng(index, seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Probe probe;
    probe.state.resize(kQuadStateDim);
    auto& s = probe.state;
    s[kX] = 3.0 * unit(rng);
    s[kY] = 3.0 * unit(rng);
    s[kZ] = 1.5 + 1.5 * unit(rng);
    double norm = 0.0;
    for (int i = kQ0; i <= kQ3; ++i) {
      s[i] = gauss(rng);
      norm += s[i] * s[i];
    }
    for (int i = kQ0; i <= kQ3; ++i) s[i] /= std::sqrt(norm);
    for (int i = kVx; i <= kVz; ++i) s[i] = 2.0 * unit(rng);
    for (int i = kP; i <= kR; ++i) s[i] = 2.0 * unit(rng);
    for (int i = kW1; i <= kW4; ++i) {
      s[i] = p.rotor_speed_lo + 0.5 * (1.0 + unit(rng)) * (p.rotor_speed_hi - p.rotor_speed_lo);
    }
    for (int i = 0; i < kQuadInputDim; ++i) {
      probe.input.push_back(p.input_lo + 0.5 * (1.0 + unit(rng)) * (p.input_hi - p.input_lo));
    }
    return probe;
  };

  const QuadState hover = hover_state(p, 0.0, 0.0, 1.0);
  const QuadInput hover_u = hover_input(p);
  auto make = [](const QuadState& s, const QuadInput& u) {
    return Probe{std::vector<double>(s.begin(), s.end()), std::vector<double>(u.begin(), u.end())};
  };
  sys.structured_probes.push_back(make(hover, hover_u));
  for (int axis = kVx; axis <= kVz; ++axis) {
    QuadState s = hover;
    s[axis] = 1.0;
    sys.structured_probes.push_back(make(s, hover_u));
  }
  QuadState idle = hover;
  for (int i = kW1; i <= kW4; ++i) idle[i] = 0.0;
  sys.structured_probes.push_back(make(idle, QuadInput{}));
  return sys;
}

SystemSpec sub1_system(double dt) {
  using namespace dynamics;
  SystemSpec sys;
  sys.state_names = {"x", "y", "z", "xdot", "ydot", "zdot"};
  sys.input_names = {"xddot", "yddot", "zddot"};
  sys.output_indices = {0, 1, 2};
  sys.dt = dt;
  sys.step = [dt](std::span<const ad::Var> x, std::span<const ad::Var> u) {
    const auto s = sub1_step(to_array<kSub1StateDim>(x), to_array<kSub1InputDim>(u), dt);
    return std::vector<ad::Var>(s.begin(), s.end());
  };
  sys.sample_probe = [](std::uint64_t index, std::uint64_t seed) {
    std::mt19937_64 rng = probe_rng(index, seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Probe probe;
    for (int i = 0; i < 3; ++i) probe.state.push_back(3.0 * unit(rng));
    for (int i = 0; i < 3; ++i) probe.state.push_back(2.0 * unit(rng));
    for (int i = 0; i < 3; ++i) probe.input.push_back(4.0 * unit(rng));
    return probe;
  };
  sys.structured_probes.push_back(Probe{std::vector<double>(6, 0.0), std::vector<double>(3, 0.0)});
  return sys;
}

SystemSpec single_integrator_system(double dt) {
  SystemSpec sys;
  sys.state_names = {"x"};
  sys.input_names = {"u"};
  sys.output_indices = {0};
  sys.dt = dt;
  sys.step = [dt](std::span<const ad::Var> x, std::span<const ad::Var> u) {
    return std::vector<ad::Var>{x[0] + u[0] * dt};
  };
  sys.sample_probe = [](std::uint64_t index, std::uint64_t seed) {
    std::mt19937_64 rng = probe_rng(index, seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    return Probe{{3.0 * unit(rng)}, {unit(rng)}};
  };
  sys.structured_probes.push_back(Probe{{0.0}, {0.0}});
  return sys;
}

}  // namespace dpcpsf::reldeg
