#pragma once

#include "saarti/types.hpp"

#include <vector>

namespace saarti {

/// Planar pose for rendering.
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

/// Planner-side state gamma = [s, d, sdot, ddot, sddot, dddot].
struct PlannerState {
  double s = 0.0;
  double d = 0.0;
  double sdot = 0.0;
  double ddot = 0.0;
  double sddot = 0.0;
  double dddot = 0.0;
};

/// Raised when the planar speed is too small to recover a heading.
class DegenerateVelocityError : public std::runtime_error {
public:
  DegenerateVelocityError() : std::runtime_error("degenerate planar velocity in frame transform") {}
};

/// Road centerline: curvature and lane half-width over arc length, resampled
/// onto a uniform grid, plus an integrated Cartesian anchor table for plots.
///
/// Curvature is interpolated piecewise linearly; the Cartesian table is exact
/// for the piecewise-linear curvature up to the quadrature of the heading
/// integral (Simpson on the grid cells).
class Centerline {
public:
  /// Uniform grid resolution [m].
  static constexpr double kGridDs = 0.5;

  struct Breakpoint {
    double s;
    double kappa;
    double half_width;
  };

  static Centerline from_breakpoints(
    const std::vector<Breakpoint> & pts, const Pose2 & anchor = Pose2{});

  /// Straight road of given length and lane half-width.
  static Centerline straight(double length, double half_width);
  /// Constant-curvature road (positive radius curves left).
  static Centerline constant_curve(double length, double radius, double half_width);

  double length() const { return s_.back(); }
  double curvature(double s) const;
  /// Derivative of the piecewise-linear curvature (piecewise constant).
  double curvature_deriv(double s) const;
  double width(double s) const;

  /// Pose of the point at (s, d); heading is the centerline tangent at s.
  Pose2 to_cartesian(double s, double d) const;

private:
  double clamp_s(double s) const;
  int cell(double s) const;

  std::vector<double> s_;
  std::vector<double> kappa_;
  std::vector<double> half_width_;
  std::vector<double> cx_, cy_, cpsi_;
  Pose2 anchor_;
};

/// Map the vehicle state (with its current input) to the planner tuple gamma.
/// sdot/ddot follow the road-aligned kinematics exactly; sddot/dddot are their
/// time derivatives along the dynamics with the linear rear tire.
PlannerState vehicle_to_planner(
  const VehicleState & x, const ControlInput & u, const Centerline & road,
  const VehicleParams & p);

/// Reconstruct a vehicle state from a planner tuple. The reconstruction puts
/// all lateral motion into the relative heading (vy = 0) and sets the yaw rate
/// from the path curvature, so planned paths are kinematically exact.
VehicleState planner_to_vehicle(const PlannerState & g, const Centerline & road);

/// Planar pose of a vehicle state (vehicle heading = tangent heading + dpsi).
Pose2 frenet_to_cartesian(const VehicleState & x, const Centerline & road);

}  // namespace saarti
