#pragma once

#include "saarti/qp.hpp"
#include "saarti/sampling_planner.hpp"

#include <vector>

namespace saarti {

/// Per-step soft bounds on s, d and vx, k = 0..N.
struct StateCorridor {
  std::vector<double> s_min, s_max;
  std::vector<double> d_min, d_max;
  std::vector<double> vx_min, vx_max;

  int steps() const { return static_cast<int>(s_min.size()); }
};

/// Penalty on the three corridor slack variables; must dominate Q and R.
struct SlackWeights {
  Mat3 beta = 1e6 * Mat3::Identity();
};

struct CorridorParams {
  double margin = 0.6;    ///< clearance margin beyond the disc radii [m]
  double ds_back = 2.0;   ///< allowed progress deficit w.r.t. the warm start [m]
  double ds_fwd = 5.0;    ///< allowed progress surplus [m]
  double r_veh = 1.0;     ///< vehicle footprint radius [m]
  double v_max = 40.0;    ///< scenario speed cap [m/s]
  double a_lat = 3.0;     ///< lateral acceleration assumed reachable while
                          ///< braking; shapes the approach funnel that prices
                          ///< the evasion into the QP before the obstacle [m/s^2]
};

class CorridorInversionError : public std::runtime_error {
public:
  CorridorInversionError()
  : std::runtime_error("state corridor inverted: lane narrower than the vehicle footprint")
  {
  }
};

/// Corridor around a collision-free warm start: lane bounds shrunk by the
/// footprint, tightened beside obstacles on the side opposite the warm
/// start's passing side, progress bounds around the warm start (capped ahead
/// of an obstacle the warm start stops short of), and scenario speed bounds.
/// All bounds are opened minimally where needed so the warm start itself is
/// strictly inside.
StateCorridor build_corridor(
  const Trajectory & warm, const std::vector<Obstacle> & obstacles, const Centerline & road,
  const CorridorParams & cp);

/// Tight tracking corridor around a plan (for the plan-and-track baseline).
StateCorridor build_tracking_corridor(
  const Trajectory & plan, const std::vector<Obstacle> & obstacles, const Centerline & road,
  const CorridorParams & cp, double track_halfwidth, double track_ds, double track_dv);

/// Condensed QP over [delta-u stages; slacks] with the state rollout matrices
/// needed to reconstruct trajectories from the solution.
struct CondensedQp {
  QpProblem prob;
  HorizonStructure structure;
  std::vector<Vec6> nominal;  ///< states at delta-u = 0 (warm + initial-deviation rollout)
  std::vector<Eigen::Matrix<double, 6, Eigen::Dynamic>> input_to_state;
  double objective_offset = 0.0;      ///< cost value at (delta-u, sigma) = (0, 0)
  double warm_input_violation = 0.0;  ///< pre-assembly violation of the hard input rows at 0
  double certificate_violation = 0.0; ///< violation of l <= 0 <= u on the assembled rows
  int n_inputs = 0;
  int polytope_rows = 0;
};

/// Assemble the condensed QP: states eliminated through the affine LTV
/// dynamics from x_t, quadratic cost against per-step reference states plus
/// the slack penalty, hard input-polytope rows and soft corridor rows.
/// (delta-u, sigma) = (0, 0) is feasible for the assembled problem.
CondensedQp assemble_qp(
  const Trajectory & warm, const StateCorridor & corridor, const InputPolytope & poly,
  const std::vector<Jacobians> & jacobians, const CostWeights & weights,
  const SlackWeights & slack_w, const VehicleState & x_t, const std::vector<Vec6> & ref_states);

struct OptimizerDiagnostics {
  QpStatus qp_status = QpStatus::kMaxIterations;
  int qp_iterations = 0;
  int qp_solves = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double objective_warm = 0.0;
  double warm_input_violation = 0.0;
  double certificate_violation = 0.0;
  bool fell_back_to_warm = false;
};

/// Result of one optimization cycle. The first state equals the measured
/// state and every input satisfies the hard polytope exactly.
struct OptimalTrajectory {
  std::vector<VehicleState> states;
  std::vector<ControlInput> inputs;
  Vec3 slacks = Vec3::Zero();
  double objective = 0.0;
  OptimizerDiagnostics diag;
  QpSolution qp;                ///< retained for warm starting the next cycle
  HorizonStructure structure;   ///< row/variable layout of the solved problem
};

/// Slowest reference speed the optimizer linearizes at. Below it the Euler
/// step map of the tire rows is unstable and the condensed rollout explodes.
double linearization_speed_floor(double Ts, const VehicleParams & p);

/// Jacobians of the step map along the warm start (one per input stage),
/// evaluated at the warm pairs with the curvature at each reference position
/// and the reference speed floored at linearization_speed_floor.
std::vector<Jacobians> linearize_trajectory(
  const Trajectory & warm, const Centerline & road, double Ts, const VehicleParams & p);

/// Single linearize-and-solve step: one QP, reconstruction through the LTV
/// model, radial projection of the inputs onto the polytope, and fallback to
/// the warm start when the solver fails or does not improve on it. When
/// keep_problem is given, the assembled problem is copied out (for dumps).
OptimalTrajectory optimize(
  const Trajectory & warm, const StateCorridor & corridor, const InputPolytope & poly,
  const std::vector<Jacobians> & jacobians, const CostWeights & weights,
  const SlackWeights & slack_w, const VehicleState & x_t, const std::vector<Vec6> & ref_states,
  const QpSettings & qp_settings, const std::optional<QpWarmStart> & qp_warm = std::nullopt,
  QpProblem * keep_problem = nullptr);

/// Constant reference sequence (the regulation form of the cost).
std::vector<Vec6> constant_reference(const VehicleState & x_ref, int N);

}  // namespace saarti
