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

// Quadcopter rigid-body model, its Euler discretization, the position/velocity
// subsystem it decomposes into, and the cascade P controller that drives the
// attitude/rotor subsystem.
//
// Frame conventions: world frame is ENU with z up. The quaternion (q0 scalar)
// rotates body vectors into the world frame. Rotors are in a "+" layout:
// motor 1 on +x_body, 2 on +y_body, 3 on -x_body, 4 on -y_body; motors 1 and 3
// produce positive yaw reaction torque.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include <Eigen/Dense>

#include "dpcpsf/autodiff.hpp"

namespace dpcpsf::dynamics {

inline constexpr int kQuadStateDim = 17;
inline constexpr int kQuadInputDim = 4;
inline constexpr int kSub1StateDim = 6;
inline constexpr int kSub1InputDim = 3;

// Index layout of the 17-dimensional state.
enum QuadIndex : int {
  kX = 0, kY, kZ,
  kQ0, kQ1, kQ2, kQ3,
  kVx, kVy, kVz,
  kP, kQ, kR,
  kW1, kW2, kW3, kW4,
};

template <class T> using QuadStateT = std::array<T, kQuadStateDim>;
template <class T> using QuadInputT = std::array<T, kQuadInputDim>;
// {x, y, z, xdot, ydot, zdot}
template <class T> using Sub1StateT = std::array<T, kSub1StateDim>;
// {xddot, yddot, zddot}
template <class T> using Sub1InputT = std::array<T, kSub1InputDim>;

using QuadState = QuadStateT<double>;
using QuadInput = QuadInputT<double>;
using Sub1State = Sub1StateT<double>;
using Sub1Input = Sub1InputT<double>;

struct Box3 {
  std::array<double, 3> lo{};
  std::array<double, 3> hi{};
};

struct QuadParams {
  double mass = 1.2;                                  // kg
  std::array<double, 3> inertia{0.0123, 0.0123, 0.0224};  // kg m^2
  double arm_length = 0.16;                           // m
  double thrust_coefficient = 1.076e-5;               // N / (rad/s)^2
  double torque_coefficient = 1.632e-7;               // N m / (rad/s)^2
  double rotor_time_constant = 0.07;                  // s
  double max_rotor_speed = 1050.0;                    // rad/s at command 1
  double linear_drag = 0.05;                          // N / (m/s)
  double gravity = 9.81;                              // m/s^2
  double rotor_speed_lo = 0.0;
  double rotor_speed_hi = 1050.0;
  double input_lo = 0.0;
  double input_hi = 1.0;

  // Throws std::invalid_argument when a field violates its invariant.
  void validate() const;

  // Rotor speed at which four rotors balance gravity.
  double hover_rotor_speed() const;
  double hover_command() const;
};

struct PGains {
  std::array<double, 3> attitude{6.0, 6.0, 3.0};  // 1/s
  std::array<double, 3> rate{12.0, 12.0, 6.0};    // 1/s
  double yaw_setpoint = 0.0;                      // rad
  // Maps per-motor thrust to [total thrust, tau_x, tau_y, tau_z].
  Eigen::Matrix4d mixer = Eigen::Matrix4d::Identity();

  void validate() const;
};

// Mixing matrix implied by the rotor layout.
Eigen::Matrix4d default_mixer(const QuadParams& p);
PGains default_gains(const QuadParams& p);

QuadState hover_state(const QuadParams& p, double x = 0.0, double y = 0.0,
                      double z = 0.0);
QuadInput hover_input(const QuadParams& p);

Sub1State sub1_of(const QuadState& s);

// Continuous-time state derivative.
template <class T>
QuadStateT<T> quad_derivative(const QuadStateT<T>& s, const QuadInputT<T>& u,
                              const QuadParams& p) {
  QuadStateT<T> d;
  const T& q0 = s[kQ0];
  const T& q1 = s[kQ1];
  const T& q2 = s[kQ2];
  const T& q3 = s[kQ3];
  const T& wx = s[kP];
  const T& wy = s[kQ];
  const T& wz = s[kR];

  d[kX] = s[kVx];
  d[kY] = s[kVy];
  d[kZ] = s[kVz];

  // q_dot = 0.5 * q (x) [0, omega_body]
  d[kQ0] = -0.5 * (q1 * wx + q2 * wy + q3 * wz);
  d[kQ1] = 0.5 * (q0 * wx + q2 * wz - q3 * wy);
  d[kQ2] = 0.5 * (q0 * wy - q1 * wz + q3 * wx);
  d[kQ3] = 0.5 * (q0 * wz + q1 * wy - q2 * wx);

  const T f1 = p.thrust_coefficient * (s[kW1] * s[kW1]);
  const T f2 = p.thrust_coefficient * (s[kW2] * s[kW2]);
  const T f3 = p.thrust_coefficient * (s[kW3] * s[kW3]);
  const T f4 = p.thrust_coefficient * (s[kW4] * s[kW4]);
  const T thrust = f1 + f2 + f3 + f4;

  // Third column of the rotation matrix: body z axis in the world frame.
  const T bx = 2.0 * (q1 * q3 + q0 * q2);
  const T by = 2.0 * (q2 * q3 - q0 * q1);
  const T bz = 1.0 - 2.0 * (q1 * q1 + q2 * q2);

  const double inv_m = 1.0 / p.mass;
  d[kVx] = (thrust * bx) * inv_m - (p.linear_drag * inv_m) * s[kVx];
  d[kVy] = (thrust * by) * inv_m - (p.linear_drag * inv_m) * s[kVy];
  d[kVz] = (thrust * bz) * inv_m - (p.linear_drag * inv_m) * s[kVz] - p.gravity;

  const double kappa = p.torque_coefficient / p.thrust_coefficient;
  const T tau_x = p.arm_length * (f2 - f4);
  const T tau_y = p.arm_length * (f3 - f1);
  const T tau_z = kappa * ((f1 - f2) + (f3 - f4));

  const double jx = p.inertia[0];
  const double jy = p.inertia[1];
  const double jz = p.inertia[2];
  // J omega_dot = tau - omega x J omega
  d[kP] = (tau_x - (jz - jy) * (wy * wz)) / jx;
  d[kQ] = (tau_y - (jx - jz) * (wz * wx)) / jy;
  d[kR] = (tau_z - (jy - jx) * (wx * wy)) / jz;

  const double inv_tau = 1.0 / p.rotor_time_constant;
  for (int i = 0; i < 4; ++i) {
    d[kW1 + i] = (u[i] * p.max_rotor_speed - s[kW1 + i]) * inv_tau;
  }
  return d;
}

// x[k+1] = x[k] + dt * xdot[k], followed by quaternion renormalization and
// clamping of rotor speeds to their box.
template <class T>
QuadStateT<T> euler_step(const QuadStateT<T>& s, const QuadInputT<T>& u, double dt,
                         const QuadParams& p) {
  if (!(dt > 0.0)) throw std::invalid_argument("euler_step: dt must be positive");
  const QuadStateT<T> d = quad_derivative(s, u, p);
  QuadStateT<T> n;
  for (int i = 0; i < kQuadStateDim; ++i) n[i] = s[i] + dt * d[i];
  const T norm = ad::sqrt(n[kQ0] * n[kQ0] + n[kQ1] * n[kQ1] + n[kQ2] * n[kQ2] +
                          n[kQ3] * n[kQ3]);
  for (int i = kQ0; i <= kQ3; ++i) n[i] = n[i] / norm;
  for (int i = kW1; i <= kW4; ++i) {
    n[i] = ad::min(ad::max(n[i], p.rotor_speed_lo), p.rotor_speed_hi);
  }
  return n;
}

// Double integrator: pos += vel * dt; vel += a * dt.
template <class T, class U>
auto sub1_step(const Sub1StateT<T>& s, const Sub1InputT<U>& a, double dt) {
  using R = std::conditional_t<ad::is_var_v<T> || ad::is_var_v<U>, ad::Var, double>;
  if (!(dt > 0.0)) throw std::invalid_argument("sub1_step: dt must be positive");
  Sub1StateT<R> n;
  for (int i = 0; i < 3; ++i) {
    n[i] = s[i] + s[3 + i] * dt;
    n[3 + i] = s[3 + i] + a[i] * dt;
  }
  return n;
}

struct CascadeOutput {
  QuadInput input{};
  // Set when the commanded acceleration leaves no usable thrust direction;
  // the controller then falls back to minimum thrust on the current attitude.
  bool degenerate = false;
};

// Maps a commanded subsystem-1 acceleration to motor commands: desired thrust
// vector -> desired attitude (yaw held at the setpoint) -> attitude P law ->
// body-rate P law -> mixer -> per-motor commands clipped to the input box.
CascadeOutput cascade_p(const Sub1Input& a_cmd, const QuadState& s, const PGains& g,
                        const QuadParams& p);

// Multiplies mass, inertia, thrust and torque coefficients and the rotor time
// constant by independent factors drawn from [1 - magnitude, 1 + magnitude].
QuadParams perturbed_plant(const QuadParams& p, std::uint64_t seed, double magnitude);

// Rotor thrust/torque per motor command, exposed for controller tests.
Eigen::Vector4d wrench_from_rotor_speeds(const QuadState& s, const QuadParams& p);

double quaternion_norm(const QuadState& s);

}  // namespace dpcpsf::dynamics
