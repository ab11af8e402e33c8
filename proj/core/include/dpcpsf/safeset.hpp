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

// Data-driven safe sets built from filtered training rollouts. Each set is a
// point cloud whose convex hull is the safe region in that set's coordinates:
// the raw position/velocity state, or the (clearance, radial velocity) pair of
// a cylinder obstacle.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpcpsf/autodiff.hpp"
#include "dpcpsf/dpc.hpp"
#include "dpcpsf/geometry.hpp"

namespace dpcpsf::safeset {

using dynamics::Sub1State;
using dynamics::Sub1StateT;

class SafeSetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Constraints {
  StateBox state_box;
  AccelBox input_box;
  std::vector<CylinderConstraint> cylinders;
};

// The box and cylinder constraints that training penalized.
Constraints constraints_of(const dpc::LossWeights& w);

struct FilterResult {
  std::vector<Sub1State> points;
  std::size_t kept = 0;
  std::size_t total = 0;

  double survivor_fraction() const { return total ? double(kept) / double(total) : 0.0; }
};

// True when the rollout stays inside every constraint, never touches a
// cylinder, did not diverge and ends within eps_conv of its reference.
bool rollout_survives(const dpc::Rollout& r, const Constraints& c, double eps_conv);

// Throws SafeSetError when nothing survives.
FilterResult filter_rollouts(const dpc::RolloutStore& store, const Constraints& c,
                             double eps_conv = 0.2);
FilterResult filter_rollouts(const std::vector<const dpc::Rollout*>& rollouts,
                             const Constraints& c, double eps_conv = 0.2);

// (clearance to the cylinder surface, velocity away from the axis).
template <class T>
std::array<T, 2> cyl_transform(const Sub1StateT<T>& s, const CylinderConstraint& c) {
  const T dx = s[0] - c.x;
  const T dy = s[1] - c.y;
  const double d2 = ad::value_of(dx) * ad::value_of(dx) + ad::value_of(dy) * ad::value_of(dy);
  if (!(d2 > 0.0)) throw std::domain_error("cyl_transform: point on the cylinder axis");
  const T d = ad::sqrt(dx * dx + dy * dy);
  return {d - c.radius, (s[3] * dx + s[4] * dy) / d};
}

enum class Transform { kIdentity, kCylinder };

struct Hyperplane {
  Eigen::VectorXd w;
  double b = 0.0;
  int set_id = 0;

  double eval(const Eigen::VectorXd& x) const { return w.dot(x) + b; }
};

struct PointSet {
  Transform transform = Transform::kIdentity;
  CylinderConstraint cylinder;  // kCylinder only
  // One point per column.
  Eigen::MatrixXd points;
  Eigen::VectorXd centroid;
  double diameter = 0.0;

  int dim() const { return static_cast<int>(points.rows()); }
  Eigen::Index size() const { return points.cols(); }
};

struct BuildConfig {
  // Shift of stored cylinder points along the clearance axis.
  double robustness = 0.8;
  // Input clouds larger than this are subsampled before pruning.
  std::size_t max_points = 20000;
  // Drop points that lie inside the hull of the others.
  bool prune = true;
  std::uint64_t seed = 11;
};

class SafeSet {
 public:
  static constexpr int kSchemaVersion = 1;

  SafeSet() = default;

  const std::vector<PointSet>& sets() const { return sets_; }
  const PointSet& set(int id) const;
  int num_sets() const { return static_cast<int>(sets_.size()); }
  double robustness() const { return robustness_; }

  // Coordinates of a subsystem-1 state in the space of set `id`.
  Eigen::VectorXd to_set_space(int id, const Sub1State& x) const;

  void save(const std::string& dir) const;
  static SafeSet load(const std::string& dir);

 private:
  friend SafeSet build_safe_set(const std::vector<Sub1State>&, const Constraints&,
                                const BuildConfig&);
  friend SafeSet make_safe_set(std::vector<PointSet>, double);
  std::vector<PointSet> sets_;
  double robustness_ = 0.0;
};

// Set 0 holds raw states, set i > 0 holds cylinder i - 1.
SafeSet build_safe_set(const std::vector<Sub1State>& points, const Constraints& c,
                       const BuildConfig& cfg = {});
// Wraps ready-made sets; fills centroids and diameters.
SafeSet make_safe_set(std::vector<PointSet> sets, double robustness);

// Hyperplane through the nearest `dim` affinely independent points of the
// set, oriented so the centroid lies on the non-positive side.
Hyperplane nearest_hyperplane(const Eigen::VectorXd& x, const PointSet& set, int set_id = 0);
Hyperplane nearest_hyperplane(const Sub1State& x, int set_id, const SafeSet& ss);
// One hyperplane per set, in set order.
std::vector<Hyperplane> nearest_hyperplanes(const Sub1State& x, const SafeSet& ss);
// The half-space test used by membership_fast, with a tolerance scaled by the
// set diameter.
bool half_space_holds(const Hyperplane& h, const Eigen::VectorXd& y, const PointSet& set);

// Convex-hull membership by linear-programming feasibility.
bool membership_exact(const Eigen::VectorXd& x, const Eigen::MatrixXd& points,
                      double tol = 1e-9);
bool membership_exact(const Sub1State& x, const SafeSet& ss);
// Nearest-hyperplane half-space test in every set.
bool membership_fast(const Sub1State& x, const SafeSet& ss);

// Indices of the points that are vertices of the hull of all points.
std::vector<Eigen::Index> hull_vertices(const Eigen::MatrixXd& points, std::uint64_t seed = 11);

// Frank-Wolfe bounds on the Euclidean distance from x to the hull.
struct DistanceBounds {
  double lower = 0.0;
  double upper = 0.0;
};
DistanceBounds hull_distance(const Eigen::VectorXd& x, const Eigen::MatrixXd& points,
                             double stop_below, double stop_above, int max_iter = 5000);

enum class BandClass { kInterior, kExterior, kBand };

// Interior: a ball of radius `band` around x lies in the hull (checked through
// the cross-polytope of radius band * sqrt(dim)). Exterior: distance > band.
BandClass classify_band(const Eigen::VectorXd& x, const PointSet& set, double band);

}  // namespace dpcpsf::safeset
