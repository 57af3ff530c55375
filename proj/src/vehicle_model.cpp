#include "saarti/vehicle_model.hpp"

#include <cmath>

namespace saarti {

double rear_slip_angle(const VehicleState & x, const VehicleParams & p)
{
  const double vx_guarded = std::max(x.vx, kSpeedEps);
  return std::atan((x.vy - p.lr * x.psidot) / vx_guarded);
}

double rear_lateral_force(const VehicleState & x, const VehicleParams & p)
{
  return -p.Car * rear_slip_angle(x, p);
}

Vec6 continuous_dynamics(
  const VehicleState & x, const ControlInput & u, double kappa_c, const VehicleParams & p,
  double rear_force, double frame_eps)
{
  const double denom = 1.0 - x.d * kappa_c;
  if (std::abs(denom) < frame_eps) {
    throw SingularFrameError(denom);
  }
  const double c = std::cos(x.dpsi);
  const double s = std::sin(x.dpsi);
  const double sdot = (x.vx * c - x.vy * s) / denom;

  Vec6 dx;
  dx[kS] = sdot;
  dx[kD] = x.vx * s + x.vy * c;
  dx[kDpsi] = x.psidot - kappa_c * sdot;
  dx[kPsidot] = (p.lf * u.Fyf - p.lr * rear_force) / p.Iz;
  dx[kVx] = u.Fx / p.m;
  dx[kVy] = (u.Fyf + rear_force) / p.m - x.vx * x.psidot;
  return dx;
}

VehicleState discrete_step(
  const VehicleState & x, const ControlInput & u, double Ts, double kappa_c,
  const VehicleParams & p)
{
  const Vec6 dx = continuous_dynamics(x, u, kappa_c, p, rear_lateral_force(x, p));
  return VehicleState::from_vec(x.vec() + Ts * dx);
}

Jacobians linearize(
  const VehicleState & x_ref, const ControlInput & u_ref, double Ts, double kappa_c,
  const VehicleParams & p)
{
  if (!(x_ref.vx > 0.0)) {
    throw std::domain_error("linearize: reference longitudinal velocity must be positive");
  }
  const double denom = 1.0 - x_ref.d * kappa_c;
  if (std::abs(denom) < kFrameEps) {
    throw SingularFrameError(denom);
  }

  const double c = std::cos(x_ref.dpsi);
  const double s = std::sin(x_ref.dpsi);
  const double w = x_ref.vx * c - x_ref.vy * s;  // tangential planar velocity

  // Rear tire: Fyr = -Car * atan(arg), arg = (vy - lr*psidot) / vx_guarded.
  // Below the low-speed guard the denominator is frozen, so dFyr/dvx = 0 there.
  const double vx_g = std::max(x_ref.vx, kSpeedEps);
  const double arg = (x_ref.vy - p.lr * x_ref.psidot) / vx_g;
  const double datan = 1.0 / (1.0 + arg * arg);
  const double dFyr_dvy = -p.Car * datan / vx_g;
  const double dFyr_dpsidot = p.Car * datan * p.lr / vx_g;
  const double dFyr_dvx =
    (x_ref.vx > kSpeedEps) ? p.Car * datan * arg / vx_g : 0.0;

  // Continuous-time Jacobian rows.
  Mat6 Jx = Mat6::Zero();
  Mat62 Ju = Mat62::Zero();

  // sdot = w / denom
  Jx(kS, kD) = w * kappa_c / (denom * denom);
  Jx(kS, kDpsi) = (-x_ref.vx * s - x_ref.vy * c) / denom;
  Jx(kS, kVx) = c / denom;
  Jx(kS, kVy) = -s / denom;

  // ddot = vx*s + vy*c
  Jx(kD, kDpsi) = w;
  Jx(kD, kVx) = s;
  Jx(kD, kVy) = c;

  // dpsi_dot = psidot - kappa_c * sdot
  Jx.row(kDpsi) = -kappa_c * Jx.row(kS);
  Jx(kDpsi, kPsidot) += 1.0;

  // psidot_dot = (lf*Fyf - lr*Fyr(x)) / Iz
  Jx(kPsidot, kPsidot) = -p.lr * dFyr_dpsidot / p.Iz;
  Jx(kPsidot, kVx) = -p.lr * dFyr_dvx / p.Iz;
  Jx(kPsidot, kVy) = -p.lr * dFyr_dvy / p.Iz;
  Ju(kPsidot, 0) = p.lf / p.Iz;

  // vx_dot = Fx / m
  Ju(kVx, 1) = 1.0 / p.m;

  // vy_dot = (Fyf + Fyr(x)) / m - vx*psidot
  Jx(kVy, kPsidot) = dFyr_dpsidot / p.m - x_ref.vx;
  Jx(kVy, kVx) = dFyr_dvx / p.m - x_ref.psidot;
  Jx(kVy, kVy) = dFyr_dvy / p.m;
  Ju(kVy, 0) = 1.0 / p.m;

  Jacobians out;
  out.A = Mat6::Identity() + Ts * Jx;
  out.B = Ts * Ju;
  out.c = discrete_step(x_ref, u_ref, Ts, kappa_c, p).vec();
  return out;
}

}  // namespace saarti
