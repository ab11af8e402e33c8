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

// Runs every acceptance criterion against freshly trained artifacts and
// prints one PASS or FAIL line per criterion. Exit status is nonzero when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpcpsf/bench.hpp"
#include "dpcpsf/config.hpp"
#include "dpcpsf/dpc.hpp"
#include "dpcpsf/dynamics.hpp"
#include "dpcpsf/mpc.hpp"
#include "dpcpsf/psf.hpp"
#include "dpcpsf/reldeg.hpp"
#include "dpcpsf/safeset.hpp"

namespace {

namespace fs = std::filesystem;
using namespace dpcpsf;
using dynamics::QuadState;
using dynamics::Sub1State;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Artifacts {
  std::optional<dpc::TrainResult> trained;
  std::optional<safeset::SafeSet> safe_set;
  std::vector<bench::RunMetrics> runs;
  bool nav_done = false;
  bench::RunMetrics nav[4];
};

const dpc::Policy& policy_of(const Artifacts& a) { return a.trained->policy; }

// ---------------------------------------------------------------------------
// 1. Gradient fidelity

double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

Outcome gradient_fidelity(const config::Config& cfg) {
  const dpc::Policy policy = dpc::Policy::initialized(cfg.train.policy, 21);
  std::mt19937_64 rng(4);
  dpc::TrainConfig tc = cfg.train;
  tc.steps_per_rollout = 10;
  const auto [x0, ref] = dpc::sample_task(tc, rng);
  const std::vector<Sub1State> reference(ref.begin(), ref.begin() + 11);

  Eigen::VectorXd grad;
  dpc::rollout(policy, x0, reference, tc.dt, tc.loss, &grad);
  const std::vector<double> w0 = policy.weights();
  Eigen::VectorXd fd(static_cast<Eigen::Index>(w0.size()));
  dpc::Policy probe = policy;
  for (std::size_t i = 0; i < w0.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(w0[i]));
    std::vector<double> w = w0;
    w[i] = w0[i] + h;
    probe.set_weights(w);
    const double fp = dpc::rollout(probe, x0, reference, tc.dt, tc.loss).total_loss;
    w[i] = w0[i] - h;
    probe.set_weights(w);
    const double fm = dpc::rollout(probe, x0, reference, tc.dt, tc.loss).total_loss;
    fd[static_cast<Eigen::Index>(i)] = (fp - fm) / (2 * h);
  }
  const double e_loss = rel_err(grad, fd);

  // Policy Jacobian at random states.
  double e_jac = 0.0;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Sub1State x, xr;
    for (int i = 0; i < 6; ++i) x[i] = 2 * u(rng), xr[i] = 2 * u(rng);
    const Eigen::Matrix<double, 3, 6> j = dpc::policy_jacobian(policy, x, xr);
    Eigen::Matrix<double, 3, 6> jf;
    for (int c = 0; c < 6; ++c) {
      Sub1State xp = x, xm = x;
      const double h = 1e-6;
      xp[c] += h;
      xm[c] -= h;
      const auto up = dpc::policy_eval(policy, xp, xr);
      const auto um = dpc::policy_eval(policy, xm, xr);
      for (int r = 0; r < 3; ++r) jf(r, c) = (up[r] - um[r]) / (2 * h);
    }
    e_jac = std::max(e_jac, (j - jf).norm() / std::max(jf.norm(), 1e-300));
  }
  return {e_loss <= 1e-5 && e_jac <= 1e-4,
          fmt("loss-gradient rel err %.2e (<= 1e-5, %zu weights), jacobian rel err %.2e (<= 1e-4)",
              e_loss, w0.size(), e_jac)};
}

// ---------------------------------------------------------------------------
// 2. Relative degree

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& e : v) s += (s.empty() ? "" : ",") + e;
  return s;
}

Outcome relative_degree(const config::Config& cfg) {
  const reldeg::VRDReport s1 = reldeg::analyze(reldeg::sub1_system(), 32, 4);
  const reldeg::SystemSpec quad = reldeg::quad_system(cfg.run.model);
  const reldeg::VRDReport q = reldeg::analyze(quad, 32, 6);
  const reldeg::Decomposition d = reldeg::decompose(quad, q.delta);
  const bool s1_ok = s1.r == std::vector<int>{2, 2, 2} &&
                     s1.well_defined == std::vector<bool>{true, true, true};
  bool quad_poor = true;
  for (bool w : q.well_defined) quad_poor = quad_poor && !w;
  const auto& hover = quad.structured_probes.front().state;
  const bool hover_witness = q.witnesses[0] == hover && q.witnesses[1] == hover;
  const bool part_ok =
      d.x_s1 == std::vector<std::string>{"x", "y", "z", "xdot", "ydot", "zdot"} &&
      d.u_s1 == std::vector<std::string>{"xddot", "yddot", "zddot"};
  return {s1_ok && quad_poor && hover_witness && part_ok,
          fmt("sub1 r=(%d,%d,%d) well-defined=%d; quad r=(%d,%d,%d) poorly-defined=%d "
              "(hover witness %d), delta=(%d,%d,%d); x_s1={%s} u_s1={%s}",
              s1.r[0], s1.r[1], s1.r[2], int(s1_ok), q.r[0], q.r[1], q.r[2], int(quad_poor),
              int(hover_witness), q.delta[0], q.delta[1], q.delta[2], join(d.x_s1).c_str(),
              join(d.u_s1).c_str())};
}

// ---------------------------------------------------------------------------
// 3. Learning-signal pathology

// Same layout and initialization as dpc::Policy with four motor outputs in (0, 1).
struct MotorNet {
  std::vector<int> sizes;
  std::vector<double> w;

  MotorNet(const dpc::PolicySpec& spec, std::uint64_t seed) {
    sizes = {12};
    sizes.insert(sizes.end(), spec.hidden.begin(), spec.hidden.end());
    sizes.push_back(4);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      const double limit = std::sqrt(6.0 / (sizes[l] + sizes[l + 1]));
      std::uniform_real_distribution<double> d(-limit, limit);
      for (int i = 0; i < sizes[l] * sizes[l + 1]; ++i) w.push_back(d(rng));
      w.insert(w.end(), static_cast<std::size_t>(sizes[l + 1]), 0.0);
    }
  }

  std::array<ad::Var, 4> forward(std::span<const ad::Var> wv, const std::vector<ad::Var>& in) const {
    std::vector<ad::Var> act = in;
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      const int n_in = sizes[l];
      const int n_out = sizes[l + 1];
      std::vector<ad::Var> next;
      for (int i = 0; i < n_out; ++i) {
        next.push_back(ad::tanh(ad::dot(wv.subspan(off + std::size_t(i) * n_in, n_in),
                                        std::span<const ad::Var>(act),
                                        wv[off + std::size_t(n_out) * n_in + i])));
      }
      off += std::size_t(n_out) * n_in + n_out;
      act = std::move(next);
    }
    return {act[0] * 0.5 + 0.5, act[1] * 0.5 + 0.5, act[2] * 0.5 + 0.5, act[3] * 0.5 + 0.5};
  }
};

double median_abs(const Eigen::VectorXd& g) {
  std::vector<double> v(g.data(), g.data() + g.size());
  for (double& e : v) e = std::abs(e);
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

// Median |dl/dW| for `steps`-step rollouts from hover: {subsystem 1, full model}.
std::pair<double, double> gradient_medians(const config::Config& cfg, int steps) {
  // Tracking part of the loss: it is the part that reaches W through the dynamics.
  dpc::LossWeights lw = cfg.train.loss;
  lw.r = {0.0, 0.0, 0.0};
  lw.cylinders.clear();
  const double dt = cfg.train.dt;
  const Sub1State x0{-2.0, 0.0, 1.0, 0.0, 0.0, 0.0};
  const Sub1State goal{2.0, 0.0, 1.0, 0.0, 0.0, 0.0};
  const std::vector<Sub1State> reference(static_cast<std::size_t>(steps) + 1, goal);

  const std::uint64_t seed = 13;
  const dpc::Policy sub1_policy = dpc::Policy::initialized(cfg.train.policy, seed);
  Eigen::VectorXd g_sub1;
  dpc::rollout(sub1_policy, x0, reference, dt, lw, &g_sub1);

  const MotorNet net(cfg.train.policy, seed);
  const dynamics::QuadParams& p = cfg.run.model;
  const auto scale = cfg.train.policy.state_scale;
  const auto [loss, g_full] = ad::value_and_grad(
      [&](std::span<const ad::Var> wv) {
        ad::Tape* tape = wv[0].tape();
        dynamics::QuadStateT<ad::Var> x;
        const QuadState h = dynamics::hover_state(p, x0[0], x0[1], x0[2]);
        for (int i = 0; i < dynamics::kQuadStateDim; ++i) x[i] = tape->variable(h[i]);
        auto sub1 = [](const dynamics::QuadStateT<ad::Var>& s) {
          return dynamics::Sub1StateT<ad::Var>{s[dynamics::kX], s[dynamics::kY], s[dynamics::kZ],
                                               s[dynamics::kVx], s[dynamics::kVy], s[dynamics::kVz]};
        };
        const dynamics::Sub1InputT<ad::Var> zero{x[0] * 0.0, x[0] * 0.0, x[0] * 0.0};
        ad::Var total = x[0] * 0.0;
        for (int k = 0; k < steps; ++k) {
          const auto s = sub1(x);
          std::vector<ad::Var> in;
          for (int i = 0; i < 6; ++i) in.push_back(s[i] * scale[i]);
          for (int i = 0; i < 6; ++i) in.push_back(tape->variable(goal[i] * scale[i]));
          const auto m = net.forward(wv, in);
          total = total + dpc::dpc_loss(s, zero, goal, lw);
          x = dynamics::euler_step(x, dynamics::QuadInputT<ad::Var>{m[0], m[1], m[2], m[3]}, dt, p);
        }
        return total + dpc::dpc_loss(sub1(x), zero, goal, lw) * lw.terminal_weight;
      },
      Eigen::Map<const Eigen::VectorXd>(net.w.data(), static_cast<Eigen::Index>(net.w.size())));
  (void)loss;
  return {median_abs(g_sub1), median_abs(g_full)};
}

Outcome learning_signal(const config::Config& cfg) {
  const reldeg::VRDReport q = reldeg::analyze(reldeg::quad_system(cfg.run.model), 32, 6);
  const int delta = *std::min_element(q.delta.begin(), q.delta.end());
  bool pass = true;
  std::string detail = fmt("delta %d;", delta);
  for (int steps = 1; steps <= delta; ++steps) {
    const auto [m1, mf] = gradient_medians(cfg, steps);
    const double ratio = mf > 0.0 ? m1 / mf : std::numeric_limits<double>::infinity();
    pass = pass && m1 > 0.0 && ratio >= 1e3;
    detail += fmt(" %d-step: median |dl/dW| sub1 %.3e, full %.3e, ratio %.3e;", steps, m1, mf,
                  ratio);
  }
  return {pass, detail + " (ratio >= 1e3 at every length)"};
}

// ---------------------------------------------------------------------------
// 4. Training

Outcome training(const config::Config& cfg, Artifacts& art, const fs::path& out) {
  art.trained = dpc::train(cfg.train);
  const auto& b = art.trained->store.batches;
  const double ratio = b.back().mean_loss / b.front().mean_loss;
  const safeset::Constraints c = safeset::constraints_of(cfg.train.loss);
  const auto last = art.trained->store.final_batch();
  int kept = 0;
  for (const auto* r : last) kept += safeset::rollout_survives(*r, c, cfg.eps_conv);
  const double frac = double(kept) / double(last.size());
  art.trained->policy.save_json((out / "policy.json").string());
  return {ratio < 0.2 && frac >= 0.5,
          fmt("final/first batch loss %.4f (< 0.2), final-batch survivors %d/%zu = %.2f (>= 0.5)",
              ratio, kept, last.size(), frac)};
}

// ---------------------------------------------------------------------------
// 5. Schedule identity

Outcome schedule_identity() {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int valid = 0;
  double worst_sum = 0.0;
  double worst_const = 0.0;
  while (valid < 1000) {
    const int n = 2 + static_cast<int>(u(rng) * 199);
    const double ts = 1e-3 * std::pow(100.0, u(rng));
    const double tf = n * ts * (1.0 + 9.0 * u(rng));
    psf::HorizonSchedule s;
    try {
      s = psf::make_schedule(ts, tf, n);
    } catch (const psf::ScheduleError&) {
      continue;
    }
    ++valid;
    double sum = 0.0;
    for (double d : s.dt) sum += d;
    worst_sum = std::max(worst_sum, std::abs(sum - tf));
    const psf::HorizonSchedule c = psf::make_schedule(ts, n * ts, n);
    for (double d : c.dt) worst_const = std::max(worst_const, std::abs(d - ts));
  }
  return {worst_sum <= 1e-12 && worst_const == 0.0,
          fmt("1000 valid schedules: max |sum dt - T_f| %.2e (<= 1e-12), "
              "max |dt - T_s| under T_f = N T_s %.2e (== 0)",
              worst_sum, worst_const)};
}

// ---------------------------------------------------------------------------
// 6. Safe-set oracle agreement

Outcome safe_set_agreement(const config::Config& cfg, Artifacts& art, const fs::path& out) {
  const safeset::Constraints c = safeset::constraints_of(cfg.train.loss);
  safeset::FilterResult f = safeset::filter_rollouts(art.trained->store, c, cfg.eps_conv);
  art.trained->store = {};  // the rollout store is no longer needed
  int negative = 0;
  for (const auto& p : f.points) {
    for (const auto& cyl : c.cylinders) {
      const auto t = safeset::cyl_transform(p, cyl);
      if (t[0] < 0.0) ++negative;
    }
  }
  art.safe_set = safeset::build_safe_set(f.points, c, cfg.safeset);
  const std::size_t n_points = f.points.size();
  f.points = {};
  const safeset::SafeSet& ss = *art.safe_set;
  ss.save((out / "safeset").string());
  for (const auto& s : ss.sets()) {
    if (s.transform != safeset::Transform::kCylinder) continue;
    for (Eigen::Index i = 0; i < s.size(); ++i) negative += s.points(0, i) - ss.robustness() < 0.0;
  }

  int non_member = 0;
  for (const auto& s : ss.sets()) {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      non_member += !safeset::membership_exact(Eigen::VectorXd(s.points.col(i)), s.points);
    }
  }

  const safeset::PointSet& s0 = ss.set(0);
  const Eigen::VectorXd lo = s0.points.rowwise().minCoeff();
  const Eigen::VectorXd hi = s0.points.rowwise().maxCoeff();
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-0.1, 1.1);
  int n = 0, agree = 0, band = 0, inside = 0, fast_in_exact_out = 0;
  while (n < 10000) {
    Sub1State x;
    for (int k = 0; k < 6; ++k) x[k] = lo[k] + (hi[k] - lo[k]) * u(rng);
    bool on_axis = false;
    for (const auto& cyl : c.cylinders) on_axis |= std::hypot(x[0] - cyl.x, x[1] - cyl.y) < 1e-9;
    if (on_axis) continue;
    bool in_band = false;
    for (int i = 0; i < ss.num_sets() && !in_band; ++i) {
      in_band = safeset::classify_band(ss.to_set_space(i, x), ss.set(i),
                                       0.05 * ss.set(i).diameter) == safeset::BandClass::kBand;
    }
    if (in_band) {
      ++band;
      continue;
    }
    ++n;
    const bool exact = safeset::membership_exact(x, ss);
    const bool fast = safeset::membership_fast(x, ss);
    agree += exact == fast;
    inside += exact;
    fast_in_exact_out += fast && !exact;
  }
  const double rate = double(agree) / n;
  std::string sizes;
  for (const auto& s : ss.sets()) sizes += (sizes.empty() ? "" : "/") + std::to_string(s.size());
  return {rate >= 0.98 && non_member == 0 && negative == 0,
          fmt("agreement %d/%d = %.4f (>= 0.98; %d exact members, %d fast-in/exact-out, %d band "
              "samples skipped); generator non-members %d; negative clearances %d; "
              "%zu safe states, stored %s",
              agree, n, rate, inside, fast_in_exact_out, band, non_member, negative, n_points,
              sizes.c_str())};
}

// ---------------------------------------------------------------------------
// 7. PSF trigger semantics

Outcome trigger_semantics(const config::Config& cfg, const Artifacts& art) {
  const safeset::SafeSet& ss = *art.safe_set;
  const dpc::Policy& policy = policy_of(art);
  const safeset::PointSet& s0 = ss.set(0);
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<Eigen::Index> pick(0, s0.size() - 1);
  int tested = 0, exact_interior = 0, mismatch = 0, drawn = 0;
  while (tested < 1000 && drawn < 200000) {
    ++drawn;
    // Convex combination of stored states: inside the exact hull.
    Eigen::VectorXd y = Eigen::VectorXd::Zero(6);
    double wsum = 0.0;
    for (int j = 0; j < 4; ++j) {
      const double w = u(rng);
      y += w * s0.points.col(pick(rng));
      wsum += w;
    }
    y /= wsum;
    Sub1State x;
    for (int k = 0; k < 6; ++k) x[k] = y[k];
    if (!safeset::membership_exact(x, ss)) continue;
    ++exact_interior;
    // Interior for the event trigger: every nearest half-space holds.
    if (!safeset::membership_fast(x, ss)) continue;
    ++tested;
    const Sub1State xr{4 * u(rng) - 2, 3 * u(rng) - 1.5, 1.0, 0.0, 0.0, 0.0};
    const psf::FilterResult r = psf::filter(x, xr, policy, ss, cfg.run.psf);
    mismatch += r.triggered || r.u != dpc::policy_eval(policy, x, xr);
  }

  // Beyond the stored extremes along one axis; outside the exact hull.
  int exterior = 0, missed = 0, not_exterior = 0;
  for (int k = 0; k < 6; ++k) {
    for (double side : {-1.0, 1.0}) {
      Sub1State x;
      for (int i = 0; i < 6; ++i) x[i] = s0.centroid[i];
      x[k] = side > 0 ? s0.points.row(k).maxCoeff() + 0.5 : s0.points.row(k).minCoeff() - 0.5;
      not_exterior += safeset::membership_exact(x, ss);
      ++exterior;
      missed += !psf::filter(x, Sub1State{2, 0, 1, 0, 0, 0}, policy, ss, cfg.run.psf).triggered;
    }
  }

  // Reported only: neither state is an exterior point of this safe set.
  const Sub1State goal{2, 0, 1, 0, 0, 0};
  Sub1State centroid;
  for (int i = 0; i < 6; ++i) centroid[i] = s0.centroid[i];
  const double centroid_clear = cfg.train.loss.cylinders.empty()
                                    ? 0.0
                                    : cfg.train.loss.cylinders[0].clearance(centroid[0], centroid[1]);
  const bool centroid_trig = psf::filter(centroid, goal, policy, ss, cfg.run.psf).triggered;
  const Sub1State xa = dynamics::sub1_of(bench::adversarial(cfg.run.model).initial);
  const bool adv_member = safeset::membership_exact(xa, ss);
  const bool adv_trig = psf::filter(xa, goal, policy, ss, cfg.run.psf).triggered;
  return {tested == 1000 && mismatch == 0 && missed == 0 && not_exterior == 0,
          fmt("%d trigger-interior points (from %d exact-interior draws): %d not bit-exact "
              "pass-through; exterior %d/%d triggered (%d not exact exterior); info: centroid "
              "clearance %.2f m triggered=%d, adversarial start exact member=%d triggered=%d",
              tested, exact_interior, mismatch, exterior - missed, exterior, not_exterior,
              centroid_clear, int(centroid_trig), int(adv_member), int(adv_trig))};
}

// ---------------------------------------------------------------------------
// 8-10. Closed loop

bench::Artifacts run_artifacts(const Artifacts& a) { return {&policy_of(a), &*a.safe_set}; }

Outcome adversarial(const config::Config& cfg, Artifacts& art) {
  const bench::Scenario sc = bench::adversarial(cfg.run.model);
  int dpc_inf = 0, psf_ok = 0;
  double worst_clear = std::numeric_limits<double>::infinity();
  double worst_cost = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    bench::RunMetrics d = bench::run_scenario(sc, bench::ControllerKind::kDpc, cfg.run,
                                              run_artifacts(art), seed);
    bench::RunMetrics f = bench::run_scenario(sc, bench::ControllerKind::kDpcPsf, cfg.run,
                                              run_artifacts(art), seed);
    dpc_inf += std::isinf(d.cost);
    psf_ok += std::isfinite(f.cost) && f.min_clearance >= 0.0;
    worst_clear = std::min(worst_clear, f.min_clearance);
    worst_cost = std::max(worst_cost, f.cost);
    if (seed == 1) {
      art.runs.push_back(std::move(d));
      art.runs.push_back(std::move(f));
    }
  }
  return {dpc_inf == 10 && psf_ok == 10,
          fmt("DPC infinite cost on %d/10 seeds; DPC+PSF finite with clearance >= 0 on %d/10 "
              "(worst clearance %.3f m, worst cost %.1f)",
              dpc_inf, psf_ok, worst_clear, worst_cost)};
}

void run_navigation(const config::Config& cfg, Artifacts& art) {
  if (art.nav_done) return;
  const bench::Scenario sc = bench::navigation(cfg.run.model);
  const bench::ControllerKind kinds[4] = {bench::ControllerKind::kDpc, bench::ControllerKind::kDpcPsf,
                                          bench::ControllerKind::kVtnmpc, bench::ControllerKind::kNmpc};
  for (int i = 0; i < 4; ++i) {
    art.nav[i] = bench::run_scenario(sc, kinds[i], cfg.run, run_artifacts(art), 1);
    art.runs.push_back(art.nav[i]);
  }
  art.nav_done = true;
}

Outcome navigation(const config::Config& cfg, Artifacts& art) {
  run_navigation(cfg, art);
  const auto& n = art.nav;
  bool reach = true;
  std::string errs;
  for (const auto& m : n) {
    reach = reach && m.final_error < 0.3 && !m.diverged;
    errs += fmt("%s %.3f ", bench::controller_name(m.controller), m.final_error);
  }
  const double ratio = n[1].cost / n[3].cost;
  return {reach && n[1].trigger_fraction < 0.05 && ratio <= 2.0,
          fmt("final error [m] %s(< 0.3); DPC+PSF trigger fraction %.3f (< 0.05); "
              "cost DPC+PSF %.1f vs NMPC %.1f, ratio %.3f (<= 2)",
              errs.c_str(), n[1].trigger_fraction, n[1].cost, n[3].cost, ratio)};
}

Outcome compute_time(const config::Config& cfg, Artifacts& art) {
  run_navigation(cfg, art);
  const auto& n = art.nav;
  // NMPC with the filter's horizon step count, timed over the first second.
  config::Config c = cfg;
  c.run.nmpc.steps = c.run.psf.schedule.steps;
  c.run.nmpc.horizon = c.run.nmpc.steps * c.run.control_period;
  bench::Scenario sc = bench::navigation(cfg.run.model);
  sc.duration = 1.0;
  const bench::RunMetrics matched = bench::run_scenario(sc, bench::ControllerKind::kNmpc, c.run,
                                                        run_artifacts(art), 1);
  const double t[4] = {n[0].controller_time_median_us, n[1].controller_time_median_us,
                       n[2].controller_time_median_us, n[3].controller_time_median_us};
  const double r_matched = t[1] / matched.controller_time_median_us;
  const double r_vt = t[1] / t[2];
  return {t[0] < t[1] && t[1] < t[2] && t[2] < t[3] && r_matched <= 0.1,
          fmt("median per-step us: DPC %.1f < DPC+PSF %.1f < VTNMPC %.1f < NMPC %.1f; "
              "DPC+PSF / NMPC(N=%d) %.4f (<= 0.1), DPC+PSF / VTNMPC(N=%d) %.4f",
              t[0], t[1], t[2], t[3], c.run.nmpc.steps, r_matched, cfg.run.vtnmpc.steps, r_vt)};
}

// ---------------------------------------------------------------------------
// 11. MPC cost evaluator

Outcome mpc_cost_examples(const config::Config& cfg) {
  const mpc::MPCCostWeights w = cfg.run.weights;
  const QuadState xr = dynamics::hover_state(cfg.run.model, 0.5, -1.0, 1.0);
  const dynamics::QuadInput zero{};
  QuadState xp = xr;
  xp[dynamics::kX] += 1.0;
  QuadState xq = xr;
  xq[dynamics::kQ0] = std::cos(0.3);
  xq[dynamics::kQ3] = std::sin(0.3);
  const double a = mpc::mpc_cost(xr, zero, xr, w);
  const double b = mpc::mpc_cost(xp, zero, xr, w);
  const double q = mpc::mpc_cost(xq, zero, xr, w);
  return {a == 0.0 && b == 1.0 && q == 0.0,
          fmt("at reference %.17g (== 0), unit x error %.17g (== 1), quaternion error %.17g (== 0)",
              a, b, q)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dpcpsf acceptance criteria"};
  std::string cfg_path = DPCPSF_DEFAULT_CONFIG;
  std::string out = "acceptance_out";
  app.add_option("--config", cfg_path, "JSON config")->capture_default_str();
  app.add_option("--out", out, "Directory for artifacts and the run table")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const config::Config cfg = config::load_config(cfg_path);
  fs::create_directories(out);
  Artifacts art;
  int failed = 0;

  struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0: no runtime bound
    std::function<Outcome()> run;
  };
  const fs::path dir(out);
  const std::vector<Criterion> criteria{
      {1, "gradient fidelity", 10, [&] { return gradient_fidelity(cfg); }},
      {2, "relative-degree suite", 60, [&] { return relative_degree(cfg); }},
      {3, "learning-signal pathology", 0, [&] { return learning_signal(cfg); }},
      {4, "training", 900, [&] { return training(cfg, art, dir); }},
      {5, "schedule identity", 1, [&] { return schedule_identity(); }},
      {6, "safe-set oracle agreement", 300, [&] { return safe_set_agreement(cfg, art, dir); }},
      {7, "psf trigger semantics", 120, [&] { return trigger_semantics(cfg, art); }},
      {8, "adversarial reproduction", 600, [&] { return adversarial(cfg, art); }},
      {9, "navigation reproduction", 0, [&] { return navigation(cfg, art); }},
      {10, "compute-time ordering", 0, [&] { return compute_time(cfg, art); }},
      {11, "mpc cost evaluator", 0, [&] { return mpc_cost_examples(cfg); }},
  };
  for (const Criterion& c : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    if (c.budget_s > 0 && secs >= c.budget_s) {
      o.pass = false;
      o.detail += fmt("; runtime over budget of %.0f s", c.budget_s);
    }
    failed += !o.pass;
    std::printf("%s [%d] %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  bench::emit_report(art.runs, (dir / "report").string());
  std::printf("%d/%zu criteria passed; report in %s/report\n",
              static_cast<int>(criteria.size()) - failed, criteria.size(), out.c_str());
  return failed ? 1 : 0;
}
