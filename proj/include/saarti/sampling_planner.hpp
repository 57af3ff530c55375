#pragma once

#include "saarti/frenet.hpp"
#include "saarti/input_constraints.hpp"
#include "saarti/types.hpp"

#include <limits>
#include <optional>
#include <vector>

namespace saarti {

/// Quintic lateral profile d(t) = sum a_i t^i, t in [0, T].
struct QuinticCoeffs {
  Vec6 a = Vec6::Zero();

  double value(double t) const;
  double first(double t) const;
  double second(double t) const;
};

/// Coefficients of the quintic meeting [d0, ddot0, dddot0, dN, ddotN, dddotN]
/// at t = 0 and t = T. The 6x6 boundary system is nonsingular for T > 0.
QuinticCoeffs solve_quintic(const Vec6 & boundary, double T);

/// Piecewise-affine arc-length profile: the speed is constant on n equal
/// sub-intervals, with segment speeds interpolating sdot0 -> sdotN linearly
/// across segment boundaries.
struct LongitudinalProfile {
  double s0 = 0.0;
  double T = 0.0;
  std::vector<double> segment_speeds;

  double segment_duration() const { return T / static_cast<double>(segment_speeds.size()); }
  double position(double t) const;
  double speed(double t) const;
};

LongitudinalProfile longitudinal_profile(
  double s0, double sdot0, double sdotN, double T, int n_segments);

/// Static disc obstacle in road coordinates, unknown to the controller before
/// appear_time.
struct Obstacle {
  double s = 0.0;
  double d = 0.0;
  double radius = 0.5;
  double appear_time = 0.0;
};

/// Terminal sampling grid: lateral offsets and terminal path speeds; the
/// terminal lateral rates and accelerations are fixed to zero.
struct TerminalStateGrid {
  std::vector<double> lateral_offsets;
  std::vector<double> speeds;

  bool empty() const { return lateral_offsets.empty() || speeds.empty(); }
  int size() const { return static_cast<int>(lateral_offsets.size() * speeds.size()); }
};

/// Default grid: n_lateral offsets uniform over the drivable width and
/// terminal speeds {0, v/2, v} around the current path speed.
TerminalStateGrid make_terminal_grid(
  const VehicleState & x0, const Centerline & road, int n_lateral, double r_veh);

/// A horizon-length candidate: N+1 states, N inputs, selection metadata.
struct Trajectory {
  enum class Source { kSampled, kShiftedPrevious };

  std::vector<VehicleState> states;
  std::vector<ControlInput> inputs;
  double cost = std::numeric_limits<double>::infinity();
  bool feasible = false;
  bool collision_free = false;
  Source source = Source::kSampled;
  int grid_index = std::numeric_limits<int>::max();
  double max_yaw_residual = 0.0;  ///< worst yaw-balance residual of the input recovery [rad/s^2]

  int horizon() const { return static_cast<int>(inputs.size()); }
};

/// Tire forces reproducing the velocity rows of the step from x_k to x_k1;
/// the yaw-balance row is reported as a residual, not enforced.
ControlInput equivalent_input(
  const VehicleState & x_k, const VehicleState & x_k1, double Ts, const VehicleParams & p,
  double * yaw_residual = nullptr);

/// One candidate per grid pair: quintic lateral + piecewise-affine
/// longitudinal boundary-value solution sampled at k*Ts, mapped to vehicle
/// states, with equivalent inputs recovered by inverse dynamics. Candidates
/// crossing the frame singularity or a degenerate speed are dropped.
std::vector<Trajectory> sample_trajectories(
  const VehicleState & x0, const ControlInput & u0, const TerminalStateGrid & grid,
  const Centerline & road, int N, double Ts, const VehicleParams & p, int n_segments);

/// True iff every recovered input lies in the polytope.
bool check_feasibility(const Trajectory & traj, const InputPolytope & poly);

/// True iff the vehicle disc stays inside the lane and clear of every
/// obstacle disc at every step.
bool check_collision(
  const Trajectory & traj, const std::vector<Obstacle> & obstacles, const Centerline & road,
  double r_veh);

/// Quadratic stage/terminal weights of the selection and optimization cost.
struct CostWeights {
  Mat6 Q = Mat6::Zero();
  Mat6 Qf = Mat6::Zero();
  Mat2 R = Mat2::Zero();
};

/// Accumulated quadratic cost with states measured as deviations from x_ref.
double evaluate_cost(const Trajectory & traj, const CostWeights & w, const VehicleState & x_ref);

class NoFeasibleTrajectoryError : public std::runtime_error {
public:
  NoFeasibleTrajectoryError()
  : std::runtime_error("no feasible collision-free candidate trajectory")
  {
  }
};

/// Forward shift: states/inputs advanced one step, terminal pair duplicated.
Trajectory shift_trajectory(const Trajectory & prev);

/// Annotate all candidates (feasibility, collision, cost) and return the
/// lowest-cost passing one; the shifted previous optimum competes on equal
/// terms. Ties break toward the lowest grid index, sampled before shifted.
/// Throws NoFeasibleTrajectoryError when nothing passes.
Trajectory select_trajectory(
  std::vector<Trajectory> & candidates, const std::optional<Trajectory> & previous_shifted,
  const InputPolytope & poly, const std::vector<Obstacle> & obstacles, const Centerline & road,
  double r_veh, const CostWeights & weights, const VehicleState & x_ref);

}  // namespace saarti
