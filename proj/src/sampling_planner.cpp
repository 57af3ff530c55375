#include "saarti/sampling_planner.hpp"

#include "saarti/vehicle_model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace saarti {

double QuinticCoeffs::value(double t) const
{
  double acc = 0.0;
  for (int i = 5; i >= 0; --i) {
    acc = acc * t + a[i];
  }
  return acc;
}

double QuinticCoeffs::first(double t) const
{
  double acc = 0.0;
  for (int i = 5; i >= 1; --i) {
    acc = acc * t + i * a[i];
  }
  return acc;
}

double QuinticCoeffs::second(double t) const
{
  double acc = 0.0;
  for (int i = 5; i >= 2; --i) {
    acc = acc * t + i * (i - 1) * a[i];
  }
  return acc;
}

QuinticCoeffs solve_quintic(const Vec6 & boundary, double T)
{
  if (!(T > 0.0)) {
    throw std::invalid_argument("solve_quintic: horizon duration must be positive");
  }
  const double T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
  Mat6 M;
  M << 1, 0, 0, 0, 0, 0,
       0, 1, 0, 0, 0, 0,
       0, 0, 2, 0, 0, 0,
       1, T, T2, T3, T4, T5,
       0, 1, 2 * T, 3 * T2, 4 * T3, 5 * T4,
       0, 0, 2, 6 * T, 12 * T2, 20 * T3;
  QuinticCoeffs out;
  out.a = M.partialPivLu().solve(boundary);
  return out;
}

LongitudinalProfile longitudinal_profile(
  double s0, double sdot0, double sdotN, double T, int n_segments)
{
  if (sdot0 < 0.0 || sdotN < 0.0 || n_segments < 1 || !(T > 0.0)) {
    throw std::invalid_argument("longitudinal_profile: invalid arguments");
  }
  LongitudinalProfile prof;
  prof.s0 = s0;
  prof.T = T;
  prof.segment_speeds.resize(static_cast<size_t>(n_segments));
  for (int j = 0; j < n_segments; ++j) {
    const double a = static_cast<double>(j) / n_segments;
    prof.segment_speeds[static_cast<size_t>(j)] = sdot0 + a * (sdotN - sdot0);
  }
  return prof;
}

double LongitudinalProfile::position(double t) const
{
  const double dt = segment_duration();
  const int n = static_cast<int>(segment_speeds.size());
  const int j = std::clamp(static_cast<int>(t / dt), 0, n - 1);
  double s = s0;
  for (int i = 0; i < j; ++i) {
    s += segment_speeds[static_cast<size_t>(i)] * dt;
  }
  return s + segment_speeds[static_cast<size_t>(j)] * (t - j * dt);
}

double LongitudinalProfile::speed(double t) const
{
  const double dt = segment_duration();
  const int n = static_cast<int>(segment_speeds.size());
  const int j = std::clamp(static_cast<int>(t / dt), 0, n - 1);
  return segment_speeds[static_cast<size_t>(j)];
}

TerminalStateGrid make_terminal_grid(
  const VehicleState & x0, const Centerline & road, int n_lateral, double r_veh)
{
  TerminalStateGrid grid;
  const double reach = std::max(0.0, road.width(x0.s) - r_veh);
  grid.lateral_offsets.resize(static_cast<size_t>(n_lateral));
  for (int i = 0; i < n_lateral; ++i) {
    const double a = n_lateral > 1 ? static_cast<double>(i) / (n_lateral - 1) : 0.5;
    grid.lateral_offsets[static_cast<size_t>(i)] = -reach + 2.0 * reach * a;
  }
  const double v0 = std::max(x0.vx, 0.0);
  grid.speeds = {0.0, 0.5 * v0, v0};
  return grid;
}

ControlInput equivalent_input(
  const VehicleState & x_k, const VehicleState & x_k1, double Ts, const VehicleParams & p,
  double * yaw_residual)
{
  ControlInput u;
  u.Fx = p.m * (x_k1.vx - x_k.vx) / Ts;
  const double Fyr = rear_lateral_force(x_k, p);
  u.Fyf = p.m * ((x_k1.vy - x_k.vy) / Ts + x_k.vx * x_k.psidot) - Fyr;
  if (yaw_residual) {
    const double yaw_accel = (x_k1.psidot - x_k.psidot) / Ts;
    *yaw_residual = std::abs(yaw_accel - (p.lf * u.Fyf - p.lr * Fyr) / p.Iz);
  }
  return u;
}

std::vector<Trajectory> sample_trajectories(
  const VehicleState & x0, const ControlInput & u0, const TerminalStateGrid & grid,
  const Centerline & road, int N, double Ts, const VehicleParams & p, int n_segments)
{
  if (grid.empty() || N < 1) {
    throw std::invalid_argument("sample_trajectories: empty grid or horizon");
  }
  const double T = N * Ts;
  const PlannerState g0 = vehicle_to_planner(x0, u0, road, p);
  const double sdot0 = std::max(g0.sdot, 0.0);

  std::vector<Trajectory> out;
  out.reserve(static_cast<size_t>(grid.size()));
  int index = 0;
  for (double d_terminal : grid.lateral_offsets) {
    for (double v_terminal : grid.speeds) {
      const int grid_index = index++;
      Vec6 boundary;
      boundary << g0.d, g0.ddot, g0.dddot, d_terminal, 0.0, 0.0;
      const QuinticCoeffs quintic = solve_quintic(boundary, T);
      const LongitudinalProfile prof =
        longitudinal_profile(g0.s, sdot0, std::max(v_terminal, 0.0), T, n_segments);

      Trajectory traj;
      traj.source = Trajectory::Source::kSampled;
      traj.grid_index = grid_index;
      traj.states.reserve(static_cast<size_t>(N) + 1);
      bool dropped = false;
      for (int k = 0; k <= N && !dropped; ++k) {
        const double t = k * Ts;
        PlannerState g;
        g.s = prof.position(t);
        g.sdot = prof.speed(t);
        g.sddot = 0.0;
        g.d = quintic.value(t);
        g.ddot = quintic.first(t);
        g.dddot = quintic.second(t);
        try {
          traj.states.push_back(planner_to_vehicle(g, road));
        } catch (const SingularFrameError &) {
          dropped = true;
        } catch (const DegenerateVelocityError &) {
          dropped = true;
        }
      }
      if (dropped) {
        continue;
      }
      traj.inputs.resize(static_cast<size_t>(N));
      for (int k = 0; k < N; ++k) {
        double res = 0.0;
        traj.inputs[static_cast<size_t>(k)] =
          equivalent_input(traj.states[static_cast<size_t>(k)], traj.states[static_cast<size_t>(k) + 1], Ts, p, &res);
        traj.max_yaw_residual = std::max(traj.max_yaw_residual, res);
      }
      out.push_back(std::move(traj));
    }
  }
  return out;
}

bool check_feasibility(const Trajectory & traj, const InputPolytope & poly)
{
  for (const ControlInput & u : traj.inputs) {
    if (!poly.contains(u.vec())) {
      return false;
    }
  }
  return true;
}

bool check_collision(
  const Trajectory & traj, const std::vector<Obstacle> & obstacles, const Centerline & road,
  double r_veh)
{
  for (const VehicleState & x : traj.states) {
    if (std::abs(x.d) + r_veh > road.width(x.s)) {
      return false;
    }
    for (const Obstacle & o : obstacles) {
      const double dist = std::hypot(x.s - o.s, x.d - o.d);
      if (dist < r_veh + o.radius) {
        return false;
      }
    }
  }
  return true;
}

double evaluate_cost(const Trajectory & traj, const CostWeights & w, const VehicleState & x_ref)
{
  const int N = traj.horizon();
  const Vec6 ref = x_ref.vec();
  double J = 0.0;
  for (int k = 0; k < N; ++k) {
    const Vec6 dev = traj.states[static_cast<size_t>(k)].vec() - ref;
    const Vec2 u = traj.inputs[static_cast<size_t>(k)].vec();
    J += dev.dot(w.Q * dev) + u.dot(w.R * u);
  }
  const Vec6 dev_terminal = traj.states.back().vec() - ref;
  J += dev_terminal.dot(w.Qf * dev_terminal);
  return J;
}

Trajectory shift_trajectory(const Trajectory & prev)
{
  Trajectory out;
  out.source = Trajectory::Source::kShiftedPrevious;
  out.states.assign(prev.states.begin() + 1, prev.states.end());
  out.states.push_back(prev.states.back());
  out.inputs.assign(prev.inputs.begin() + 1, prev.inputs.end());
  out.inputs.push_back(prev.inputs.back());
  return out;
}

Trajectory select_trajectory(
  std::vector<Trajectory> & candidates, const std::optional<Trajectory> & previous_shifted,
  const InputPolytope & poly, const std::vector<Obstacle> & obstacles, const Centerline & road,
  double r_veh, const CostWeights & weights, const VehicleState & x_ref)
{
  if (candidates.empty() && !previous_shifted) {
    throw NoFeasibleTrajectoryError();
  }

  auto annotate = [&](Trajectory & t) {
    t.feasible = check_feasibility(t, poly);
    t.collision_free = check_collision(t, obstacles, road, r_veh);
    t.cost = (t.feasible && t.collision_free)
               ? evaluate_cost(t, weights, x_ref)
               : std::numeric_limits<double>::infinity();
  };

  const Trajectory * best = nullptr;
  for (Trajectory & t : candidates) {
    annotate(t);
    if (!t.feasible || !t.collision_free) continue;
    if (!best || t.cost < best->cost || (t.cost == best->cost && t.grid_index < best->grid_index)) {
      best = &t;
    }
  }

  std::optional<Trajectory> shifted = previous_shifted;
  if (shifted) {
    annotate(*shifted);
    if (shifted->feasible && shifted->collision_free && (!best || shifted->cost < best->cost)) {
      best = &*shifted;
    }
  }

  if (!best) {
    throw NoFeasibleTrajectoryError();
  }
  return *best;
}

}  // namespace saarti
