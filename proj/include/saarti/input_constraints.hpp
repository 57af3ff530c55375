#pragma once

#include "saarti/types.hpp"

#include <vector>

namespace saarti {

/// Identified tire-road friction coefficient with its acquisition time.
struct FrictionEstimate {
  double mu = 0.8;
  double timestamp = 0.0;
};

/// Steering / drivetrain force box (the non-friction input bounds).
struct ActuatorLimits {
  double Fyf_max = 8069.0;   ///< |front lateral force| bound [N]
  double Fx_min = -16000.0;  ///< braking bound [N], negative
  double Fx_max = 4000.0;    ///< drive bound [N]

  bool valid() const { return Fyf_max > 0.0 && Fx_min < 0.0 && Fx_max > 0.0; }
};

/// Convex input-constraint set {u : H u <= h} in the (Fyf, Fx) plane.
/// Rows are normalized so that h == 1 (the origin is strictly interior);
/// vertices are kept for containment tests and plots.
struct InputPolytope {
  Eigen::Matrix<double, Eigen::Dynamic, 2> H;
  Eigen::VectorXd h;
  std::vector<Vec2> vertices;  ///< counter-clockwise
  double mu_used = 0.0;

  int rows() const { return static_cast<int>(H.rows()); }

  /// Membership with per-row tolerance eps_scale * ||h||_inf.
  bool contains(const Vec2 & u, double eps_scale = 1e-9) const;
};

/// Inscribed polygon of the friction ellipse with half-axes mu*Fzf (lateral)
/// and mu*Fz (longitudinal): n_edges vertices equally spaced in parameter
/// angle, lying on the ellipse, so the polygon under-approximates it.
InputPolytope inscribe_ellipse_polytope(double mu, double Fzf, double Fz, int n_edges);

/// Friction polytope intersected with the actuator box, redundant halfspaces
/// removed. Fz is taken as the total weight m*g; Fzf from the static load split.
InputPolytope build_input_constraints(
  double mu, const VehicleParams & p, const ActuatorLimits & limits, int n_edges);

/// Scale u toward the origin until it is inside the polytope (identity when
/// already inside). Used to make applied inputs satisfy H u <= h exactly.
Vec2 project_radially(const InputPolytope & poly, const Vec2 & u);

/// Largest t >= 0 with t * dir inside the polytope.
double ray_scale_to_boundary(const InputPolytope & poly, const Vec2 & dir);

}  // namespace saarti
