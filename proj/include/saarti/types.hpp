#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace saarti {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat62 = Eigen::Matrix<double, 6, 2>;

/// Static parameters of the single-track vehicle model.
struct VehicleParams {
  double m = 1500.0;    ///< mass [kg]
  double Iz = 2250.0;   ///< yaw inertia [kg m^2]
  double lf = 1.04;     ///< CoG to front axle [m]
  double lr = 1.42;     ///< CoG to rear axle [m]
  double Caf = 160e3;   ///< front cornering stiffness [N/rad]
  double Car = 180e3;   ///< rear cornering stiffness [N/rad]
  double g = 9.81;      ///< gravitational acceleration [m/s^2]

  double wheelbase() const { return lf + lr; }
  /// Static front-axle normal load from moment balance about the rear axle.
  double front_axle_load() const { return m * g * lr / (lf + lr); }
  /// Static rear-axle normal load.
  double rear_axle_load() const { return m * g * lf / (lf + lr); }
  double total_load() const { return m * g; }

  bool valid() const
  {
    return m > 0 && Iz > 0 && lf > 0 && lr > 0 && Caf > 0 && Car > 0 && g > 0;
  }
};

/// Road-aligned vehicle state [s, d, dpsi, psidot, vx, vy].
struct VehicleState {
  double s = 0.0;       ///< curvilinear abscissa [m]
  double d = 0.0;       ///< lateral offset from centerline, positive left [m]
  double dpsi = 0.0;    ///< heading relative to centerline tangent [rad]
  double psidot = 0.0;  ///< yaw rate [rad/s]
  double vx = 0.0;      ///< body longitudinal velocity [m/s]
  double vy = 0.0;      ///< body lateral velocity [m/s]

  Vec6 vec() const
  {
    Vec6 v;
    v << s, d, dpsi, psidot, vx, vy;
    return v;
  }

  static VehicleState from_vec(const Vec6 & v)
  {
    return VehicleState{v[0], v[1], v[2], v[3], v[4], v[5]};
  }

  bool all_finite() const { return vec().allFinite(); }
};

/// State vector index names, matching VehicleState field order.
enum StateIndex : int { kS = 0, kD = 1, kDpsi = 2, kPsidot = 3, kVx = 4, kVy = 5 };

/// Tire-force input [Fyf, Fx]: front lateral force and combined longitudinal force.
struct ControlInput {
  double Fyf = 0.0;  ///< front lateral tire force [N]
  double Fx = 0.0;   ///< combined longitudinal tire force [N]

  Vec2 vec() const { return Vec2(Fyf, Fx); }
  static ControlInput from_vec(const Vec2 & v) { return ControlInput{v[0], v[1]}; }
};

/// Linearization of the discrete-time step map about a reference pair.
/// x_next ~= c + A * (x - x_ref) + B * (u - u_ref), with c = f(x_ref, u_ref).
struct Jacobians {
  Mat6 A = Mat6::Zero();
  Mat62 B = Mat62::Zero();
  Vec6 c = Vec6::Zero();
};

/// Raised when the road-aligned frame degenerates (|1 - d*kappa| below guard).
class SingularFrameError : public std::runtime_error {
public:
  explicit SingularFrameError(double denom)
  : std::runtime_error("singular road-aligned frame: |1 - d*kappa| = " + std::to_string(std::abs(denom)))
  {
  }
};

}  // namespace saarti
