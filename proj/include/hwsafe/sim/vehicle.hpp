#ifndef HWSAFE__SIM__VEHICLE_HPP_
#define HWSAFE__SIM__VEHICLE_HPP_

/**
 * @file
 * @brief Kinematic vehicle model and its linearization.
 *
 * The model is the Euler-discretized kinematic model
 *
 *   v+   = v + a dt
 *   x+   = x + v cos(psi) dt
 *   y+   = y + v sin(psi) dt
 *   psi+ = psi + (v / L) tan(delta) dt
 *
 * where every right-hand side uses the pre-step state.
 */

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hwsafe/common.hpp"

namespace hwsafe {

/// Kinematic state. Component order in vector form is [x, y, v, psi].
struct VehicleState
{
  double x{0.0};
  double y{0.0};
  double v{0.0};
  double psi{0.0};

  Eigen::Vector4d vec() const { return {x, y, v, psi}; }

  static VehicleState from_vec(const Eigen::Vector4d & s) { return {s(0), s(1), s(2), s(3)}; }

  double vx() const { return v * std::cos(psi); }
  double vy() const { return v * std::sin(psi); }

  bool operator==(const VehicleState &) const = default;
};

/// Control input. Vector form is [a, delta].
struct ControlInput
{
  double a{0.0};
  double delta{0.0};

  Eigen::Vector2d vec() const { return {a, delta}; }

  static ControlInput from_vec(const Eigen::Vector2d & u) { return {u(0), u(1)}; }

  bool operator==(const ControlInput &) const = default;
};

struct VehicleParams
{
  /// vehicle length, also used as the wheelbase of the kinematic model
  double length{5.0};
  double width{2.0};
  double a_min{-6.0};
  double a_max{3.0};
  double delta_max{0.3};
  /// max change of acceleration per step
  double da_max{1.5};
  /// max change of steering per step
  double ddelta_max{0.05};

  void validate() const
  {
    if (!(length > 0.0) || !(width > 0.0)) { throw ConfigError("vehicle length and width must be positive"); }
    if (!(a_min < 0.0 && 0.0 < a_max)) { throw ConfigError("vehicle accel bounds must satisfy a_min < 0 < a_max"); }
    if (!(delta_max > 0.0)) { throw ConfigError("vehicle delta_max must be positive"); }
    if (!(da_max > 0.0) || !(ddelta_max > 0.0)) { throw ConfigError("vehicle input-rate bounds must be positive"); }
  }
};

/// Clamp an input into the box of @p params. Returns whether clamping changed it.
inline bool clamp_input(ControlInput & u, const VehicleParams & params)
{
  const ControlInput orig = u;
  u.a                     = std::clamp(u.a, params.a_min, params.a_max);
  u.delta                 = std::clamp(u.delta, -params.delta_max, params.delta_max);
  return !(orig == u);
}

/**
 * @brief Advance the kinematic model one step.
 *
 * Out-of-bound inputs are clamped. Speed is clamped at zero and yaw is wrapped to (-pi, pi].
 */
inline VehicleState step_kinematics(const VehicleState & s, ControlInput u, const VehicleParams & params, double dt)
{
  clamp_input(u, params);
  VehicleState n;
  n.v   = std::max(0.0, s.v + u.a * dt);
  n.x   = s.x + s.v * std::cos(s.psi) * dt;
  n.y   = s.y + s.v * std::sin(s.psi) * dt;
  n.psi = wrap_angle(s.psi + s.v / params.length * std::tan(u.delta) * dt);
  return n;
}

/// Affine model x+ = A x + B u + C.
struct LinearizedDynamics
{
  Eigen::Matrix4d A;
  Eigen::Matrix<double, 4, 2> B;
  Eigen::Vector4d C;

  Eigen::Vector4d apply(const Eigen::Vector4d & x, const Eigen::Vector2d & u) const { return A * x + B * u + C; }
};

/**
 * @brief Linearize the discrete model around (op_point, op_input).
 *
 * A = I + dt df/dx, B = dt df/du, C chosen so the model is exact at the operating point.
 * The operating point is not clamped or wrapped, so the residual is computed on the raw
 * (unwrapped, unclamped) update.
 */
inline LinearizedDynamics linearize_dynamics(
  const VehicleState & op_point, const ControlInput & op_input, const VehicleParams & params, double dt)
{
  const double v = op_point.v, psi = op_point.psi, delta = op_input.delta, L = params.length;
  const double c = std::cos(psi), s = std::sin(psi), t = std::tan(delta), cd = std::cos(delta);

  LinearizedDynamics lin;
  lin.A.setIdentity();
  lin.A(0, 2) = dt * c;
  lin.A(0, 3) = -dt * v * s;
  lin.A(1, 2) = dt * s;
  lin.A(1, 3) = dt * v * c;
  lin.A(3, 2) = dt * t / L;

  lin.B.setZero();
  lin.B(2, 0) = dt;
  lin.B(3, 1) = dt * v / (L * cd * cd);

  const Eigen::Vector4d x0 = op_point.vec();
  const Eigen::Vector2d u0 = op_input.vec();
  Eigen::Vector4d f0;
  f0 << x0(0) + v * c * dt, x0(1) + v * s * dt, v + op_input.a * dt, psi + v / L * t * dt;
  lin.C = f0 - lin.A * x0 - lin.B * u0;
  return lin;
}

}  // namespace hwsafe

#endif  // HWSAFE__SIM__VEHICLE_HPP_
