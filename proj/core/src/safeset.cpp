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

#include "dpcpsf/safeset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

namespace dpcpsf::safeset {
namespace {

using json = nlohmann::json;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr const char* kManifestFormat = "dpcpsf.safeset";

// Phase-one simplex on [P; 1] lambda = [x; 1], lambda >= 0. Dantzig pricing,
// switching to Bland's rule when the objective stalls.
class HullLp {
 public:
  HullLp(const MatrixXd& p, const VectorXd& x, double tol)
      : p_(p), m_(static_cast<int>(p.rows()) + 1), tol_(tol) {
    b_.resize(m_);
    b_.head(m_ - 1) = x;
    b_[m_ - 1] = 1.0;
    sign_ = VectorXd::Ones(m_);
    for (int i = 0; i < m_; ++i) {
      if (b_[i] < 0.0) {
        sign_[i] = -1.0;
        b_[i] = -b_[i];
      }
    }
  }

  bool feasible() {
    const Index n = p_.cols();
    basis_.assign(m_, -1);
    for (int i = 0; i < m_; ++i) basis_[i] = n + i;
    refactor();
    const double scale = std::max(1.0, b_.lpNorm<Eigen::Infinity>());
    const double stop = tol_ * scale;
    double best = objective();
    int stall = 0;
    bool bland = false;
    const int max_iter = 50 * m_ + 10 * static_cast<int>(std::min<Index>(n, 1000));
    for (int it = 0; it < max_iter; ++it) {
      if (best <= stop) return true;
      // y^T = c_B^T B^-1, then reduced costs of the structural columns.
      VectorXd cb = VectorXd::Zero(m_);
      for (int i = 0; i < m_; ++i) cb[i] = basis_[i] >= n ? 1.0 : 0.0;
      const VectorXd y = binv_.transpose() * cb;
      const VectorXd ys = y.cwiseProduct(sign_);
      const VectorXd rc = -((p_.transpose() * ys.head(m_ - 1)).array() + ys[m_ - 1]).matrix();
      Index enter = -1;
      const double rc_tol = 1e-12 * scale;
      if (bland) {
        for (Index j = 0; j < n; ++j) {
          if (rc[j] < -rc_tol && !in_basis(j)) {
            enter = j;
            break;
          }
        }
      } else {
        double most = -rc_tol;
        for (Index j = 0; j < n; ++j) {
          if (rc[j] < most && !in_basis(j)) {
            most = rc[j];
            enter = j;
          }
        }
      }
      if (enter < 0) break;
      const VectorXd col = column(enter);
      const VectorXd d = binv_ * col;
      int leave = -1;
      double ratio = 0.0;
      for (int i = 0; i < m_; ++i) {
        if (d[i] <= 1e-12) continue;
        const double t = std::max(0.0, xb_[i]) / d[i];
        if (leave < 0 || t < ratio - 1e-15 ||
            (t <= ratio + 1e-15 && basis_[i] < basis_[leave])) {
          leave = i;
          ratio = t;
        }
      }
      if (leave < 0) break;
      basis_[leave] = enter;
      pivot(leave, d);
      if (++pivots_ % 25 == 0) refactor();
      const double obj = objective();
      if (obj < best - 1e-15 * scale) {
        best = obj;
        stall = 0;
      } else if (++stall > 2 * m_) {
        bland = true;
      }
    }
    refactor();
    return objective() <= stop;
  }

 private:
  bool in_basis(Index j) const {
    return std::find(basis_.begin(), basis_.end(), j) != basis_.end();
  }

  VectorXd column(Index j) const {
    VectorXd c(m_);
    if (j >= p_.cols()) {
      c.setZero();
      c[j - p_.cols()] = 1.0;
      return c;
    }
    c.head(m_ - 1) = p_.col(j);
    c[m_ - 1] = 1.0;
    return c.cwiseProduct(sign_);
  }

  void refactor() {
    MatrixXd bm(m_, m_);
    for (int i = 0; i < m_; ++i) bm.col(i) = column(basis_[i]);
    binv_ = bm.fullPivLu().inverse();
    xb_ = binv_ * b_;
  }

  void pivot(int r, const VectorXd& d) {
    const double piv = d[r];
    binv_.row(r) /= piv;
    xb_[r] /= piv;
    for (int i = 0; i < m_; ++i) {
      if (i == r || d[i] == 0.0) continue;
      binv_.row(i) -= d[i] * binv_.row(r);
      xb_[i] -= d[i] * xb_[r];
    }
  }

  double objective() const {
    double s = 0.0;
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] >= p_.cols()) s += std::max(0.0, xb_[i]);
    }
    return s;
  }

  const MatrixXd& p_;
  int m_;
  double tol_;
  VectorXd b_;
  VectorXd sign_;
  std::vector<Index> basis_;
  MatrixXd binv_;
  VectorXd xb_;
  long pivots_ = 0;
};

MatrixXd select_columns(const MatrixXd& p, const std::vector<Index>& idx) {
  MatrixXd out(p.rows(), static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Index>(i)) = p.col(idx[i]);
  return out;
}

int affine_rank(const MatrixXd& p, double tol) {
  if (p.cols() < 2) return 0;
  const MatrixXd d = p.rightCols(p.cols() - 1).colwise() - p.col(0);
  Eigen::JacobiSVD<MatrixXd> svd(d * d.transpose());
  const VectorXd s = svd.singularValues().cwiseSqrt();
  int r = 0;
  for (Index i = 0; i < s.size(); ++i) {
    if (s[i] > tol) ++r;
  }
  return r;
}

double diameter_of(const MatrixXd& p) {
  double best = 0.0;
  for (Index i = 0; i < p.cols(); ++i) {
    for (Index j = i + 1; j < p.cols(); ++j) {
      best = std::max(best, (p.col(i) - p.col(j)).squaredNorm());
    }
  }
  return std::sqrt(best);
}

void finish_set(PointSet& s) {
  if (s.points.cols() == 0) throw SafeSetError("safe set: empty point set");
  s.centroid = s.points.rowwise().mean();
  s.diameter = diameter_of(s.points);
}

const char* transform_name(Transform t) {
  return t == Transform::kIdentity ? "identity" : "cylinder";
}

std::vector<std::string> column_names(const PointSet& s) {
  if (s.transform == Transform::kCylinder) return {"x_c", "xdot_c"};
  return {"x", "y", "z", "xdot", "ydot", "zdot"};
}

}  // namespace

Constraints constraints_of(const dpc::LossWeights& w) {
  return Constraints{w.state_box, w.input_box, w.cylinders};
}

bool rollout_survives(const dpc::Rollout& r, const Constraints& c, double eps_conv) {
  if (r.diverged || r.x.empty() || r.any_flags() != 0) return false;
  for (std::size_t k = 0; k < r.x.size(); ++k) {
    const Sub1State& x = r.x[k];
    if (!c.state_box.contains(x)) return false;
    if (k + 1 < r.x.size() && !c.input_box.contains(r.u[k])) return false;
    for (const auto& cyl : c.cylinders) {
      if (!(cyl.clearance(x[0], x[1]) > 0.0)) return false;
    }
  }
  const Sub1State& xn = r.x.back();
  const Sub1State& rn = r.x_r[r.x.size() - 1];
  const double err = std::sqrt((xn[0] - rn[0]) * (xn[0] - rn[0]) + (xn[1] - rn[1]) * (xn[1] - rn[1]) +
                               (xn[2] - rn[2]) * (xn[2] - rn[2]));
  return err <= eps_conv;
}

FilterResult filter_rollouts(const std::vector<const dpc::Rollout*>& rollouts,
                             const Constraints& c, double eps_conv) {
  if (rollouts.empty()) throw std::invalid_argument("filter_rollouts: empty rollout store");
  FilterResult out;
  out.total = rollouts.size();
  for (const dpc::Rollout* r : rollouts) {
    if (!rollout_survives(*r, c, eps_conv)) continue;
    ++out.kept;
    out.points.insert(out.points.end(), r->x.begin(), r->x.end());
  }
  if (out.kept == 0) {
    throw SafeSetError("filter_rollouts: no rollout satisfies the constraints and converges; "
                       "train the policy for longer");
  }
  return out;
}

FilterResult filter_rollouts(const dpc::RolloutStore& store, const Constraints& c,
                             double eps_conv) {
  std::vector<const dpc::Rollout*> rs;
  rs.reserve(store.rollouts.size());
  for (const auto& r : store.rollouts) rs.push_back(&r);
  return filter_rollouts(rs, c, eps_conv);
}

const PointSet& SafeSet::set(int id) const {
  if (id < 0 || id >= num_sets()) throw std::out_of_range("SafeSet: set id out of range");
  return sets_[static_cast<std::size_t>(id)];
}

Eigen::VectorXd SafeSet::to_set_space(int id, const Sub1State& x) const {
  const PointSet& s = set(id);
  if (s.transform == Transform::kIdentity) return Eigen::Map<const VectorXd>(x.data(), 6);
  const auto t = cyl_transform(x, s.cylinder);
  return Eigen::Vector2d(t[0], t[1]);
}

SafeSet make_safe_set(std::vector<PointSet> sets, double robustness) {
  if (sets.empty()) throw SafeSetError("safe set: no point sets");
  for (auto& s : sets) finish_set(s);
  SafeSet ss;
  ss.sets_ = std::move(sets);
  ss.robustness_ = robustness;
  return ss;
}

std::vector<Index> hull_vertices(const MatrixXd& p, std::uint64_t seed) {
  const Index n = p.cols();
  const Index d = p.rows();
  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  if (n <= d + 1) return all;

  // Support points along random and axis directions are vertices already.
  std::vector<char> is_candidate(static_cast<std::size_t>(n), 0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const VectorXd scale = (p.rowwise().maxCoeff() - p.rowwise().minCoeff()).cwiseMax(1e-12);
  const int n_dirs = static_cast<int>(std::min<Index>(n, 200 * d));
  for (int k = 0; k < n_dirs + 2 * d; ++k) {
    VectorXd dir(d);
    if (k < 2 * d) {
      dir.setZero();
      dir[k / 2] = (k % 2) ? -1.0 : 1.0;
    } else {
      for (Index i = 0; i < d; ++i) dir[i] = normal(rng);
    }
    dir = dir.cwiseQuotient(scale);
    Index arg = 0;
    (dir.transpose() * p).maxCoeff(&arg);
    is_candidate[static_cast<std::size_t>(arg)] = 1;
  }

  std::vector<char> removed(static_cast<std::size_t>(n), 0);
  std::vector<Index> cand;
  for (Index i = 0; i < n; ++i) {
    if (is_candidate[static_cast<std::size_t>(i)]) cand.push_back(i);
  }
  MatrixXd cand_pts = select_columns(p, cand);
  for (Index i = 0; i < n; ++i) {
    if (is_candidate[static_cast<std::size_t>(i)]) continue;
    const VectorXd x = p.col(i);
    if (membership_exact(x, cand_pts)) {
      removed[static_cast<std::size_t>(i)] = 1;
      continue;
    }
    std::vector<Index> others;
    for (Index j = 0; j < n; ++j) {
      if (j != i && !removed[static_cast<std::size_t>(j)]) others.push_back(j);
    }
    if (membership_exact(x, select_columns(p, others))) {
      removed[static_cast<std::size_t>(i)] = 1;
    } else {
      is_candidate[static_cast<std::size_t>(i)] = 1;
      cand.push_back(i);
      cand_pts.conservativeResize(Eigen::NoChange, cand_pts.cols() + 1);
      cand_pts.col(cand_pts.cols() - 1) = x;
    }
  }
  // Candidates seeded from support directions may still be duplicates.
  std::vector<Index> out;
  for (Index i = 0; i < n; ++i) {
    if (!is_candidate[static_cast<std::size_t>(i)]) continue;
    bool dup = false;
    for (Index j : out) {
      if (p.col(j) == p.col(i)) {
        dup = true;
        break;
      }
    }
    if (!dup) out.push_back(i);
  }
  return out;
}

SafeSet build_safe_set(const std::vector<Sub1State>& points, const Constraints& c,
                       const BuildConfig& cfg) {
  if (points.empty()) throw SafeSetError("build_safe_set: no safe points");
  if (!(cfg.robustness >= 0.0)) throw std::invalid_argument("build_safe_set: robustness < 0");
  std::vector<std::size_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (cfg.max_points > 0 && idx.size() > cfg.max_points) {
    std::mt19937_64 rng(cfg.seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(cfg.max_points);
    std::sort(idx.begin(), idx.end());
  }
  const Index n = static_cast<Index>(idx.size());

  std::vector<PointSet> sets;
  PointSet raw;
  raw.points.resize(6, n);
  for (Index i = 0; i < n; ++i) {
    raw.points.col(i) = Eigen::Map<const VectorXd>(points[idx[static_cast<std::size_t>(i)]].data(), 6);
  }
  sets.push_back(std::move(raw));
  for (const auto& cyl : c.cylinders) {
    cyl.validate();
    PointSet s;
    s.transform = Transform::kCylinder;
    s.cylinder = cyl;
    s.points.resize(2, n);
    for (Index i = 0; i < n; ++i) {
      const auto t = cyl_transform(points[idx[static_cast<std::size_t>(i)]], cyl);
      if (!(t[0] > 0.0)) throw SafeSetError("build_safe_set: safe point inside a cylinder");
      s.points(0, i) = t[0] + cfg.robustness;
      s.points(1, i) = t[1];
    }
    sets.push_back(std::move(s));
  }

  for (auto& s : sets) {
    const double diam_bound =
        (s.points.rowwise().maxCoeff() - s.points.rowwise().minCoeff()).norm();
    if (affine_rank(s.points, 1e-8 * std::max(diam_bound, 1e-300)) < s.dim()) {
      throw SafeSetError("build_safe_set: fewer than dim + 1 affinely independent points");
    }
    if (cfg.prune) s.points = select_columns(s.points, hull_vertices(s.points, cfg.seed));
  }
  return make_safe_set(std::move(sets), cfg.robustness);
}

Hyperplane nearest_hyperplane(const VectorXd& x, const PointSet& set, int set_id) {
  const Index n = set.size();
  const int dim = set.dim();
  if (x.size() != dim) throw std::invalid_argument("nearest_hyperplane: dimension mismatch");
  const VectorXd d2 = (set.points.colwise() - x).colwise().squaredNorm();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  auto less = [&](Index a, Index b) { return d2[a] < d2[b] || (d2[a] == d2[b] && a < b); };
  std::size_t sorted = std::min<std::size_t>(order.size(), static_cast<std::size_t>(8 * dim + 8));
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(sorted),
                    order.end(), less);

  const double tol = 1e-8 * std::max(set.diameter, 1e-300);
  std::vector<Index> chosen;
  MatrixXd diffs(dim, 0);
  for (std::size_t k = 0; k < order.size() && static_cast<int>(chosen.size()) < dim; ++k) {
    if (k == sorted) {
      std::sort(order.begin() + static_cast<std::ptrdiff_t>(sorted), order.end(), less);
      sorted = order.size();
    }
    const Index j = order[k];
    if (chosen.empty()) {
      chosen.push_back(j);
      continue;
    }
    MatrixXd trial(dim, diffs.cols() + 1);
    trial << diffs, set.points.col(j) - set.points.col(chosen.front());
    Eigen::JacobiSVD<MatrixXd> svd(trial);
    if (svd.singularValues().minCoeff() > tol) {
      diffs = trial;
      chosen.push_back(j);
    }
  }
  if (static_cast<int>(chosen.size()) < dim) {
    throw SafeSetError("nearest_hyperplane: cannot find enough affinely independent points");
  }

  Hyperplane h;
  h.set_id = set_id;
  const VectorXd p0 = set.points.col(chosen.front());
  if (dim == 1) {
    h.w = VectorXd::Ones(1);
  } else {
    Eigen::JacobiSVD<MatrixXd> svd(diffs, Eigen::ComputeFullU);
    h.w = svd.matrixU().col(dim - 1);
  }
  h.w.normalize();
  h.b = -h.w.dot(p0);
  if (h.eval(set.centroid) > 0.0) {
    h.w = -h.w;
    h.b = -h.b;
  }
  return h;
}

Hyperplane nearest_hyperplane(const Sub1State& x, int set_id, const SafeSet& ss) {
  return nearest_hyperplane(ss.to_set_space(set_id, x), ss.set(set_id), set_id);
}

std::vector<Hyperplane> nearest_hyperplanes(const Sub1State& x, const SafeSet& ss) {
  std::vector<Hyperplane> out;
  out.reserve(static_cast<std::size_t>(ss.num_sets()));
  for (int i = 0; i < ss.num_sets(); ++i) out.push_back(nearest_hyperplane(x, i, ss));
  return out;
}

bool half_space_holds(const Hyperplane& h, const VectorXd& y, const PointSet& set) {
  return h.eval(y) <= 1e-9 * set.diameter;
}

bool membership_exact(const VectorXd& x, const MatrixXd& points, double tol) {
  if (points.cols() == 0) return false;
  if (x.size() != points.rows()) throw std::invalid_argument("membership_exact: dimension mismatch");
  const double scale = std::max(1.0, x.lpNorm<Eigen::Infinity>());
  const VectorXd lo = points.rowwise().minCoeff();
  const VectorXd hi = points.rowwise().maxCoeff();
  for (Index i = 0; i < x.size(); ++i) {
    if (x[i] < lo[i] - tol * scale || x[i] > hi[i] + tol * scale) return false;
  }
  HullLp lp(points, x, tol);
  return lp.feasible();
}

bool membership_exact(const Sub1State& x, const SafeSet& ss) {
  for (int i = 0; i < ss.num_sets(); ++i) {
    if (!membership_exact(ss.to_set_space(i, x), ss.set(i).points)) return false;
  }
  return true;
}

bool membership_fast(const Sub1State& x, const SafeSet& ss) {
  for (int i = 0; i < ss.num_sets(); ++i) {
    const VectorXd y = ss.to_set_space(i, x);
    const Hyperplane h = nearest_hyperplane(y, ss.set(i), i);
    if (!half_space_holds(h, y, ss.set(i))) return false;
  }
  return true;
}

DistanceBounds hull_distance(const VectorXd& x, const MatrixXd& points, double stop_below,
                             double stop_above, int max_iter) {
  if (points.cols() == 0) throw std::invalid_argument("hull_distance: empty point set");
  Index start = 0;
  (points.colwise() - x).colwise().squaredNorm().minCoeff(&start);
  VectorXd p = points.col(start);
  DistanceBounds out;
  out.upper = (p - x).norm();
  for (int it = 0; it < max_iter; ++it) {
    const VectorXd g = p - x;
    const double gn = g.norm();
    out.upper = std::min(out.upper, gn);
    if (gn == 0.0 || out.upper <= stop_below) break;
    Index s = 0;
    (g.transpose() * points).minCoeff(&s);
    const VectorXd ps = points.col(s);
    out.lower = std::max(out.lower, g.dot(ps - x) / gn);
    if (out.lower > stop_above) break;
    const VectorXd step = ps - p;
    const double ss = step.squaredNorm();
    if (ss == 0.0) break;
    const double gamma = std::clamp(-g.dot(step) / ss, 0.0, 1.0);
    if (gamma == 0.0) break;
    p += gamma * step;
  }
  out.lower = std::max(out.lower, 0.0);
  return out;
}

BandClass classify_band(const VectorXd& x, const PointSet& set, double band) {
  if (!membership_exact(x, set.points)) {
    const DistanceBounds d = hull_distance(x, set.points, band, band);
    return d.lower > band ? BandClass::kExterior : BandClass::kBand;
  }
  const double t = band * std::sqrt(static_cast<double>(set.dim()));
  for (int k = 0; k < set.dim(); ++k) {
    for (double sgn : {1.0, -1.0}) {
      VectorXd y = x;
      y[k] += sgn * t;
      if (!membership_exact(y, set.points)) return BandClass::kBand;
    }
  }
  return BandClass::kInterior;
}

void SafeSet::save(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = kManifestFormat;
  manifest["version"] = kSchemaVersion;
  manifest["robustness"] = robustness_;
  manifest["sets"] = json::array();
  char buf[64];
  for (std::size_t i = 0; i < sets_.size(); ++i) {
    const PointSet& s = sets_[i];
    const std::string file = "set_" + std::to_string(i) + ".csv";
    std::ofstream out(fs::path(dir) / file);
    if (!out) throw std::runtime_error("SafeSet::save: cannot write " + file);
    const auto names = column_names(s);
    for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
    out << '\n';
    for (Index j = 0; j < s.size(); ++j) {
      for (Index r = 0; r < s.points.rows(); ++r) {
        std::snprintf(buf, sizeof(buf), "%s%.17g", r ? "," : "", s.points(r, j));
        out << buf;
      }
      out << '\n';
    }
    json e;
    e["id"] = i;
    e["transform"] = transform_name(s.transform);
    if (s.transform == Transform::kCylinder) {
      e["cylinder"] = {{"x", s.cylinder.x}, {"y", s.cylinder.y}, {"radius", s.cylinder.radius}};
    }
    e["dim"] = s.dim();
    e["points"] = file;
    e["count"] = s.size();
    e["centroid"] = std::vector<double>(s.centroid.data(), s.centroid.data() + s.centroid.size());
    e["diameter"] = s.diameter;
    manifest["sets"].push_back(e);
  }
  std::ofstream m(fs::path(dir) / "manifest.json");
  if (!m) throw std::runtime_error("SafeSet::save: cannot write manifest");
  m << manifest.dump(2) << '\n';
}

SafeSet SafeSet::load(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream m(fs::path(dir) / "manifest.json");
  if (!m) throw std::runtime_error("SafeSet::load: no manifest in " + dir);
  const json manifest = json::parse(m);
  if (manifest.value("format", "") != kManifestFormat) {
    throw std::runtime_error("SafeSet::load: not a safe-set manifest");
  }
  if (manifest.value("version", 0) != kSchemaVersion) {
    throw std::runtime_error("SafeSet::load: unsupported schema version");
  }
  std::vector<PointSet> sets;
  for (const auto& e : manifest.at("sets")) {
    PointSet s;
    const std::string t = e.at("transform");
    if (t == "cylinder") {
      s.transform = Transform::kCylinder;
      const auto& c = e.at("cylinder");
      s.cylinder = CylinderConstraint{c.at("x"), c.at("y"), c.at("radius")};
    } else if (t != "identity") {
      throw std::runtime_error("SafeSet::load: unknown transform " + t);
    }
    const int dim = e.at("dim");
    const Index count = e.at("count");
    std::ifstream in(fs::path(dir) / e.at("points").get<std::string>());
    if (!in) throw std::runtime_error("SafeSet::load: missing point table");
    std::string line;
    std::getline(in, line);
    s.points.resize(dim, count);
    for (Index j = 0; j < count; ++j) {
      if (!std::getline(in, line)) throw std::runtime_error("SafeSet::load: truncated point table");
      std::istringstream row(line);
      std::string cell;
      for (int r = 0; r < dim; ++r) {
        if (!std::getline(row, cell, ',')) throw std::runtime_error("SafeSet::load: short row");
        s.points(r, j) = std::stod(cell);
      }
    }
    sets.push_back(std::move(s));
  }
  return make_safe_set(std::move(sets), manifest.at("robustness"));
}

}  // namespace dpcpsf::safeset
