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

#include "dpcpsf/dynamics.hpp"

#include <algorithm>
#include <random>
#include <string>

namespace dpcpsf::dynamics {
namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string("QuadParams: ") + name + " must be positive");
  }
}

}  // namespace

void QuadParams::validate() const {
  require_positive(mass, "mass");
  for (double j : inertia) require_positive(j, "inertia");
  require_positive(arm_length, "arm_length");
  require_positive(thrust_coefficient, "thrust_coefficient");
  require_positive(torque_coefficient, "torque_coefficient");
  require_positive(rotor_time_constant, "rotor_time_constant");
  require_positive(max_rotor_speed, "max_rotor_speed");
  require_positive(gravity, "gravity");
  if (linear_drag < 0.0) throw std::invalid_argument("QuadParams: linear_drag < 0");
  if (!(rotor_speed_lo < rotor_speed_hi)) {
    throw std::invalid_argument("QuadParams: rotor speed bounds out of order");
  }
  if (!(input_lo < input_hi)) {
    throw std::invalid_argument("QuadParams: input bounds out of order");
  }
}

double QuadParams::hover_rotor_speed() const {
  return std::sqrt(mass * gravity / (4.0 * thrust_coefficient));
}

double QuadParams::hover_command() const { return hover_rotor_speed() / max_rotor_speed; }

void PGains::validate() const {
  for (double k : attitude) {
    if (!(k > 0.0)) throw std::invalid_argument("PGains: attitude gains must be positive");
  }
  for (double k : rate) {
    if (!(k > 0.0)) throw std::invalid_argument("PGains: rate gains must be positive");
  }
  Eigen::FullPivLU<Eigen::Matrix4d> lu(mixer);
  if (lu.rank() < 4) throw std::invalid_argument("PGains: mixer is singular");
}

Eigen::Matrix4d default_mixer(const QuadParams& p) {
  const double l = p.arm_length;
  const double kappa = p.torque_coefficient / p.thrust_coefficient;
  Eigen::Matrix4d m;
  m << 1.0, 1.0, 1.0, 1.0,
       0.0, l, 0.0, -l,
       -l, 0.0, l, 0.0,
       kappa, -kappa, kappa, -kappa;
  return m;
}

PGains default_gains(const QuadParams& p) {
  PGains g;
  g.mixer = default_mixer(p);
  return g;
}

QuadState hover_state(const QuadParams& p, double x, double y, double z) {
  QuadState s{};
  s[kX] = x;
  s[kY] = y;
  s[kZ] = z;
  s[kQ0] = 1.0;
  const double w = p.hover_rotor_speed();
  for (int i = kW1; i <= kW4; ++i) s[i] = w;
  return s;
}

QuadInput hover_input(const QuadParams& p) {
  const double u = p.hover_command();
  return {u, u, u, u};
}

Sub1State sub1_of(const QuadState& s) {
  return {s[kX], s[kY], s[kZ], s[kVx], s[kVy], s[kVz]};
}

double quaternion_norm(const QuadState& s) {
  return std::sqrt(s[kQ0] * s[kQ0] + s[kQ1] * s[kQ1] + s[kQ2] * s[kQ2] + s[kQ3] * s[kQ3]);
}

Eigen::Vector4d wrench_from_rotor_speeds(const QuadState& s, const QuadParams& p) {
  Eigen::Vector4d f;
  for (int i = 0; i < 4; ++i) f[i] = p.thrust_coefficient * s[kW1 + i] * s[kW1 + i];
  return default_mixer(p) * f;
}

CascadeOutput cascade_p(const Sub1Input& a_cmd, const QuadState& s, const PGains& g,
                        const QuadParams& p) {
  CascadeOutput out;
  const Eigen::Quaterniond q(s[kQ0], s[kQ1], s[kQ2], s[kQ3]);
  const Eigen::Matrix3d rot = q.normalized().toRotationMatrix();
  const Eigen::Vector3d b3 = rot.col(2);
  const Eigen::Vector3d vel(s[kVx], s[kVy], s[kVz]);

  // Thrust vector that produces a_cmd, including drag compensation.
  Eigen::Vector3d force(a_cmd[0], a_cmd[1], a_cmd[2] + p.gravity);
  force = p.mass * force + p.linear_drag * vel;

  Eigen::Vector3d b3d;
  double thrust;
  const double fnorm = force.norm();
  if (!(fnorm > 1e-6 * p.mass * p.gravity) || !std::isfinite(fnorm)) {
    out.degenerate = true;
    b3d = b3;
    thrust = 0.0;
  } else {
    b3d = force / fnorm;
    thrust = std::max(0.0, force.dot(b3));
  }

  const Eigen::Vector3d b1c(std::cos(g.yaw_setpoint), std::sin(g.yaw_setpoint), 0.0);
  Eigen::Vector3d b2d = b3d.cross(b1c);
  if (b2d.norm() < 1e-9) {
    // Thrust axis aligned with the heading; keep the current body y axis.
    b2d = rot.col(1);
  }
  b2d.normalize();
  const Eigen::Vector3d b1d = b2d.cross(b3d);
  Eigen::Matrix3d rd;
  rd.col(0) = b1d;
  rd.col(1) = b2d;
  rd.col(2) = b3d;
  const Eigen::Quaterniond qd(rd);

  Eigen::Quaterniond qe = q.normalized().conjugate() * qd;
  if (qe.w() < 0.0) qe.coeffs() = -qe.coeffs();

  const Eigen::Vector3d omega(s[kP], s[kQ], s[kR]);
  const Eigen::Vector3d jdiag(p.inertia[0], p.inertia[1], p.inertia[2]);
  Eigen::Vector3d rate_cmd;
  for (int i = 0; i < 3; ++i) rate_cmd[i] = 2.0 * g.attitude[i] * qe.vec()[i];
  Eigen::Vector3d torque;
  for (int i = 0; i < 3; ++i) torque[i] = jdiag[i] * g.rate[i] * (rate_cmd[i] - omega[i]);
  torque += omega.cross(jdiag.cwiseProduct(omega));

  Eigen::Vector4d wrench(thrust, torque[0], torque[1], torque[2]);
  const Eigen::Vector4d motor_thrust = g.mixer.fullPivLu().solve(wrench);
  for (int i = 0; i < 4; ++i) {
    const double f = std::max(0.0, motor_thrust[i]);
    const double u = std::sqrt(f / p.thrust_coefficient) / p.max_rotor_speed;
    out.input[i] = std::clamp(u, p.input_lo, p.input_hi);
  }
  return out;
}

QuadParams perturbed_plant(const QuadParams& p, std::uint64_t seed, double magnitude) {
  if (!(magnitude >= 0.0 && magnitude < 0.5)) {
    throw std::invalid_argument("perturbed_plant: magnitude must be in [0, 0.5)");
  }
  QuadParams out = p;
  if (magnitude == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> factor(1.0 - magnitude, 1.0 + magnitude);
  out.mass *= factor(rng);
  for (double& j : out.inertia) j *= factor(rng);
  out.thrust_coefficient *= factor(rng);
  out.torque_coefficient *= factor(rng);
  out.rotor_time_constant *= factor(rng);
  return out;
}

}  // namespace dpcpsf::dynamics
