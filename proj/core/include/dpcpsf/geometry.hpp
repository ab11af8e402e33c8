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

#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace dpcpsf {

// Vertical cylinder obstacle, infinite along z.
struct CylinderConstraint {
  double x = 0.0;
  double y = 0.0;
  double radius = 0.5;

  void validate() const {
    if (!(radius > 0.0)) throw std::invalid_argument("CylinderConstraint: radius must be > 0");
  }
  // Planar distance to the axis, minus the radius.
  double clearance(double px, double py) const {
    return std::hypot(px - x, py - y) - radius;
  }
};

template <int N>
struct BoxN {
  std::array<double, N> lo{};
  std::array<double, N> hi{};

  bool contains(const std::array<double, N>& v) const {
    for (int i = 0; i < N; ++i) {
      if (v[i] < lo[i] || v[i] > hi[i]) return false;
    }
    return true;
  }
  void validate() const {
    for (int i = 0; i < N; ++i) {
      if (!(lo[i] < hi[i])) throw std::invalid_argument("box bounds out of order");
    }
  }
};

using StateBox = BoxN<6>;
using AccelBox = BoxN<3>;

}  // namespace dpcpsf
