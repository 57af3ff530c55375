#pragma once

#include "saarti/types.hpp"

namespace saarti {

/// Guard on the road-aligned frame denominator |1 - d*kappa|.
inline constexpr double kFrameEps = 1e-6;
/// Low-speed guard for slip-angle denominators [m/s].
inline constexpr double kSpeedEps = 0.1;

/// Rear slip angle atan((vy - lr*psidot) / max(vx, kSpeedEps)).
double rear_slip_angle(const VehicleState & x, const VehicleParams & p);

/// Linear-tire rear lateral force -Car * alpha_r (unsaturated).
double rear_lateral_force(const VehicleState & x, const VehicleParams & p);

/// Continuous-time state derivative of the road-aligned single-track model.
/// The rear lateral force is supplied by the caller so that prediction and
/// plant can use different rear-tire treatments.
Vec6 continuous_dynamics(
  const VehicleState & x, const ControlInput & u, double kappa_c, const VehicleParams & p,
  double rear_force, double frame_eps = kFrameEps);

/// One forward-Euler step x + Ts * f_c(x, u) with the linear rear tire.
VehicleState discrete_step(
  const VehicleState & x, const ControlInput & u, double Ts, double kappa_c,
  const VehicleParams & p);

/// Analytic Jacobians of the forward-Euler step map about (x_ref, u_ref),
/// including the rear-force dependence on state. Requires x_ref.vx > 0.
Jacobians linearize(
  const VehicleState & x_ref, const ControlInput & u_ref, double Ts, double kappa_c,
  const VehicleParams & p);

}  // namespace saarti
