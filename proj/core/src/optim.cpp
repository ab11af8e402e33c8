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

#include "dpcpsf/optim.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace dpcpsf::optim {

using Eigen::VectorXd;

void LbfgsConfig::validate() const {
  if (max_iter < 0) throw std::invalid_argument("LbfgsConfig: max_iter < 0");
  if (!(grad_tol >= 0.0)) throw std::invalid_argument("LbfgsConfig: grad_tol < 0");
  if (memory < 1) throw std::invalid_argument("LbfgsConfig: memory < 1");
  if (!(armijo > 0.0 && armijo < 1.0)) throw std::invalid_argument("LbfgsConfig: armijo not in (0,1)");
  if (!(backtrack > 0.0 && backtrack < 1.0)) {
    throw std::invalid_argument("LbfgsConfig: backtrack not in (0,1)");
  }
  if (max_backtracks < 1) throw std::invalid_argument("LbfgsConfig: max_backtracks < 1");
}

const char* status_name(Status s) {
  switch (s) {
    case Status::kConverged: return "converged";
    case Status::kMaxIterations: return "max_iterations";
    case Status::kLineSearchFailed: return "line_search_failed";
  }
  return "unknown";
}

namespace {

struct Pair {
  VectorXd s;
  VectorXd y;
  double rho;
};

VectorXd two_loop(const VectorXd& g, const std::deque<Pair>& mem) {
  VectorXd q = g;
  std::vector<double> alpha(mem.size());
  for (std::size_t i = mem.size(); i-- > 0;) {
    alpha[i] = mem[i].rho * mem[i].s.dot(q);
    q -= alpha[i] * mem[i].y;
  }
  if (!mem.empty()) {
    const Pair& last = mem.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
  }
  for (std::size_t i = 0; i < mem.size(); ++i) {
    const double beta = mem[i].rho * mem[i].y.dot(q);
    q += (alpha[i] - beta) * mem[i].s;
  }
  return -q;
}

bool finite(const VectorXd& v) { return v.allFinite(); }

}  // namespace

MinimizeResult minimize(const Objective& f, VectorXd x0, const LbfgsConfig& cfg) {
  const Eigen::Index n = x0.size();
  const double inf = std::numeric_limits<double>::infinity();
  return minimize(f, std::move(x0), VectorXd::Constant(n, -inf), VectorXd::Constant(n, inf), cfg);
}

MinimizeResult minimize(const Objective& f, VectorXd x0, const VectorXd& lower,
                        const VectorXd& upper, const LbfgsConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = x0.size();
  if (lower.size() != n || upper.size() != n) {
    throw std::invalid_argument("minimize: bound dimension mismatch");
  }
  if ((lower.array() > upper.array()).any()) throw std::invalid_argument("minimize: lower > upper");
  const double inf = std::numeric_limits<double>::infinity();
  const bool boxed = (lower.array() > -inf).any() || (upper.array() < inf).any();
  if (boxed) x0 = x0.cwiseMax(lower).cwiseMin(upper);

  // Gradient with the components that push against an active bound removed.
  auto free_part = [&](const VectorXd& x, const VectorXd& g) {
    VectorXd pg = g;
    if (!boxed) return pg;
    for (Eigen::Index i = 0; i < n; ++i) {
      if ((x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0)) pg[i] = 0.0;
    }
    return pg;
  };

  MinimizeResult out;
  VectorXd g(n);
  double fx = f(x0, &g);
  out.evaluations = 1;
  if (!std::isfinite(fx) || !finite(g)) throw ObjectiveError("minimize: objective not finite at start");
  out.x = std::move(x0);
  out.value = fx;
  out.history.push_back(fx);
  VectorXd pg = free_part(out.x, g);
  if (n == 0 || pg.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) {
    out.status = Status::kConverged;
    return out;
  }

  std::deque<Pair> mem;
  VectorXd xn(n), gn(n);
  for (int it = 0; it < cfg.max_iter; ++it) {
    VectorXd d = two_loop(pg, mem);
    if (boxed) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (pg[i] == 0.0 && g[i] != 0.0) d[i] = 0.0;
      }
    }
    if (!(pg.dot(d) < 0.0)) {
      mem.clear();
      d = -pg;
    }
    // First iteration: a unit step along -g can be far off scale.
    double step = mem.empty() ? std::min(1.0, 1.0 / pg.lpNorm<Eigen::Infinity>()) : 1.0;
    bool accepted = false;
    double fn = fx;
    for (int b = 0; b < cfg.max_backtracks; ++b) {
      xn = out.x + step * d;
      if (boxed) xn = xn.cwiseMax(lower).cwiseMin(upper);
      fn = f(xn, &gn);
      ++out.evaluations;
      const double decrease = g.dot(xn - out.x);
      if (std::isfinite(fn) && finite(gn) && decrease < 0.0 && fn <= fx + cfg.armijo * decrease) {
        accepted = true;
        break;
      }
      step *= cfg.backtrack;
    }
    if (!accepted) {
      out.status = Status::kLineSearchFailed;
      return out;
    }
    Pair p{xn - out.x, gn - g, 0.0};
    const double sy = p.s.dot(p.y);
    // Skip updates that would break positive definiteness.
    if (sy > 1e-12 * p.s.norm() * p.y.norm()) {
      p.rho = 1.0 / sy;
      mem.push_back(std::move(p));
      if (static_cast<int>(mem.size()) > cfg.memory) mem.pop_front();
    }
    out.x.swap(xn);
    g.swap(gn);
    fx = fn;
    out.value = fx;
    out.iterations = it + 1;
    out.history.push_back(fx);
    pg = free_part(out.x, g);
    if (pg.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) {
      out.status = Status::kConverged;
      return out;
    }
  }
  out.status = Status::kMaxIterations;
  return out;
}

}  // namespace dpcpsf::optim
