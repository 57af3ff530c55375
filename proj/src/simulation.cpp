#include "saarti/simulation.hpp"

#include "saarti/vehicle_model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

namespace saarti {

std::string strategy_name(Strategy s)
{
  switch (s) {
    case Strategy::kSaaRti: return "saa-rti";
    case Strategy::kSaaRtiNonAdaptive: return "saa-rti-nonadaptive";
    case Strategy::kSssMpc: return "sss-mpc";
    case Strategy::kSqpOracleLeft: return "sqp-oracle-left";
    case Strategy::kSqpOracleRight: return "sqp-oracle-right";
  }
  return "unknown";
}

Strategy parse_strategy(const std::string & name)
{
  if (name == "saa-rti") return Strategy::kSaaRti;
  if (name == "saa-rti-nonadaptive") return Strategy::kSaaRtiNonAdaptive;
  if (name == "sss-mpc") return Strategy::kSssMpc;
  if (name == "sqp-oracle-left") return Strategy::kSqpOracleLeft;
  if (name == "sqp-oracle-right") return Strategy::kSqpOracleRight;
  throw ConfigError("unknown strategy: " + name);
}

std::string outcome_name(Outcome o)
{
  switch (o) {
    case Outcome::kStoppedSafe: return "stopped-safe";
    case Outcome::kPassedSafe: return "passed-safe";
    case Outcome::kCollided: return "collided";
    case Outcome::kOffRoad: return "off-road";
    case Outcome::kTimeout: return "timeout";
  }
  return "unknown";
}

bool is_accident(Outcome o)
{
  return o == Outcome::kCollided || o == Outcome::kOffRoad;
}

std::pair<VehicleState, RealizedForces> plant_step(
  const VehicleState & x, const ControlInput & u_cmd, double mu_act, double dt,
  const VehicleParams & p, const Centerline & road)
{
  if (!(dt > 0.0)) {
    throw std::invalid_argument("plant_step: dt must be positive");
  }
  const double front_share = p.front_axle_load() / p.total_load();
  const double rear_share = 1.0 - front_share;

  // Front: commanded pair projected radially onto the actual friction circle.
  const Vec2 front_cmd(u_cmd.Fyf, front_share * u_cmd.Fx);
  const double r_front = mu_act * p.front_axle_load();
  const double cmd_norm = front_cmd.norm();
  const Vec2 front_real = (cmd_norm > r_front) ? Vec2(front_cmd * (r_front / cmd_norm)) : front_cmd;

  // Rear: longitudinal share clipped, lateral budget from the circle.
  const double r_rear = mu_act * p.rear_axle_load();
  const double Fxr = std::clamp(rear_share * u_cmd.Fx, -r_rear, r_rear);
  const double lat_budget = std::sqrt(std::max(0.0, r_rear * r_rear - Fxr * Fxr));

  auto rear_lat = [&](const VehicleState & st) {
    return std::clamp(rear_lateral_force(st, p), -lat_budget, lat_budget);
  };
  auto deriv = [&](const VehicleState & st) {
    const ControlInput u_eff{front_real.x(), front_real.y() + Fxr};
    return continuous_dynamics(st, u_eff, road.curvature(st.s), p, rear_lat(st));
  };

  const Vec6 x0 = x.vec();
  const Vec6 k1 = deriv(x);
  const Vec6 k2 = deriv(VehicleState::from_vec(x0 + 0.5 * dt * k1));
  const Vec6 k3 = deriv(VehicleState::from_vec(x0 + 0.5 * dt * k2));
  const Vec6 k4 = deriv(VehicleState::from_vec(x0 + dt * k3));
  VehicleState next = VehicleState::from_vec(x0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  next.vx = std::max(next.vx, 0.0);

  RealizedForces realized;
  realized.Fyf = front_real.x();
  realized.Fxf = front_real.y();
  realized.Fyr = rear_lat(x);
  realized.Fxr = Fxr;
  return {next, realized};
}

namespace {

struct ControllerState {
  FrictionEstimator estimator;
  std::optional<Trajectory> prev_optimal;   // X* of the previous cycle
  std::optional<Trajectory> prev_plan;      // plan-and-track baseline continuity
  std::optional<QpSolution> prev_qp;
  std::optional<HorizonStructure> prev_structure;
  ControlInput u_prev;
};

struct CycleOutput {
  ControlInput u;
  Vec3 slacks = Vec3::Zero();
  int qp_iters = 0;
  bool emergency = false;
  bool fallback = false;
  bool improvement_violated = false;
  double certificate_violation = 0.0;
  double warm_input_violation = 0.0;
};

Trajectory trajectory_from_optimal(const OptimalTrajectory & opt)
{
  Trajectory t;
  t.states = opt.states;
  t.inputs = opt.inputs;
  t.source = Trajectory::Source::kShiftedPrevious;
  return t;
}

bool speeds_nonnegative(const Trajectory & t)
{
  return std::all_of(t.states.begin(), t.states.end(), [](const VehicleState & x) { return x.vx >= 0.0; });
}

std::vector<Obstacle> visible_obstacles(const std::vector<Obstacle> & all, double t)
{
  std::vector<Obstacle> out;
  for (const Obstacle & o : all) {
    if (t >= o.appear_time) out.push_back(o);
  }
  return out;
}

// Maximal braking on the polytope boundary while holding the steady-state
// cornering force of the current lane curvature (pure straight-line braking
// on a curve steers the car off the lane).
// Latest-feasible-evasion envelope: on the approach side of each obstacle a
// plan must already be laterally clear of the latest point from which the
// dive is still reachable with a_lat. Plans that defer past it are culled so
// the selected warm start never procrastinates the evasion.
bool satisfies_evasion_envelope(
  const Trajectory & t, const std::vector<Obstacle> & obstacles, const CorridorParams & cp)
{
  const auto & st = t.states;
  for (const Obstacle & o : obstacles) {
    const double clearance = o.radius + cp.r_veh + cp.margin;
    if (st.back().s <= o.s - clearance) {
      continue;  // stops short; the progress cap handles it
    }
    // Passing side at the obstacle.
    double d_at = st.back().d;
    for (size_t k = 0; k + 1 < st.size(); ++k) {
      if (st[k].s <= o.s && o.s <= st[k + 1].s) {
        const double span = st[k + 1].s - st[k].s;
        const double a = span > 0.0 ? (o.s - st[k].s) / span : 0.0;
        d_at = (1.0 - a) * st[k].d + a * st[k + 1].d;
        break;
      }
    }
    const double side = d_at >= o.d ? 1.0 : -1.0;
    for (const VehicleState & x : st) {
      if (x.s >= o.s) continue;
      const double gap = o.s - x.s;
      double need;
      if (gap < clearance) {
        need = std::sqrt(clearance * clearance - gap * gap);
      } else {
        const double tau = (gap - clearance) / std::max(x.vx, 1.0);
        need = clearance - 0.5 * cp.a_lat * tau * tau;
        if (need <= 0.0) continue;
      }
      if (side * (x.d - o.d) < need) {
        return false;
      }
    }
  }
  return true;
}

ControlInput emergency_brake(
  const InputPolytope & poly, const VehicleState & x, double kappa, const VehicleParams & p)
{
  const double Fyf_hold = p.m * x.vx * x.vx * kappa * p.lr / (p.lf + p.lr);
  const Vec2 hold = project_radially(poly, Vec2(Fyf_hold, 0.0));
  double brake = std::numeric_limits<double>::infinity();
  for (int i = 0; i < poly.rows(); ++i) {
    if (poly.H(i, 1) < 0.0) {
      brake = std::min(brake, (poly.h[i] - poly.H(i, 0) * hold.x()) / (-poly.H(i, 1)));
    }
  }
  return ControlInput{hold.x(), std::isfinite(brake) ? -brake : 0.0};
}

// Straight maximal-braking rollout used to reseed the shifted-previous
// channel after an emergency cycle; brakes to standstill and freezes there.
Trajectory emergency_rollout(
  const VehicleState & x0, const ControlInput & u_brake, int N, double Ts,
  const Centerline & road, const VehicleParams & p)
{
  Trajectory t;
  t.source = Trajectory::Source::kShiftedPrevious;
  t.states.resize(static_cast<size_t>(N) + 1);
  t.inputs.resize(static_cast<size_t>(N));
  t.states[0] = x0;
  for (int k = 0; k < N; ++k) {
    const VehicleState & cur = t.states[static_cast<size_t>(k)];
    const bool moving = cur.vx + Ts * u_brake.Fx / p.m > 0.0;
    const ControlInput u = moving ? u_brake : ControlInput{};
    t.inputs[static_cast<size_t>(k)] = u;
    VehicleState next =
      moving ? discrete_step(cur, u, Ts, road.curvature(cur.s), p) : cur;
    next.vx = std::max(next.vx, 0.0);
    t.states[static_cast<size_t>(k) + 1] = next;
  }
  return t;
}

double side_of(const Trajectory & t, const Obstacle & o)
{
  // Lateral offset relative to the obstacle at its arc position.
  const auto & st = t.states;
  if (o.s <= st.front().s) return st.front().d - o.d;
  if (o.s >= st.back().s) return st.back().d - o.d;
  for (size_t k = 0; k + 1 < st.size(); ++k) {
    if (st[k].s <= o.s && o.s <= st[k + 1].s) {
      const double span = st[k + 1].s - st[k].s;
      const double a = span > 0.0 ? (o.s - st[k].s) / span : 0.0;
      return (1.0 - a) * st[k].d + a * st[k + 1].d - o.d;
    }
  }
  return st.back().d - o.d;
}

// Nonlinear re-rollout of an input sequence under the controller model
// (linear rear tire), integrated with RK4 substeps so that near-stop tail
// speeds stay well inside the integrator's stability region. Linearizing
// around this keeps the LTV prediction honest: the kinematically
// reconstructed candidate states do not satisfy the model's yaw balance.
Trajectory reroll_consistent(
  const VehicleState & x0, const std::vector<ControlInput> & inputs, double Ts,
  const Centerline & road, const VehicleParams & p)
{
  constexpr int kSubsteps = 10;
  Trajectory t;
  t.source = Trajectory::Source::kShiftedPrevious;
  t.inputs = inputs;
  t.states.resize(inputs.size() + 1);
  t.states[0] = x0;
  const double dt = Ts / kSubsteps;
  for (size_t k = 0; k < inputs.size(); ++k) {
    VehicleState xs = t.states[k];
    for (int i = 0; i < kSubsteps; ++i) {
      auto deriv = [&](const VehicleState & st) {
        return continuous_dynamics(
          st, inputs[k], road.curvature(st.s), p, rear_lateral_force(st, p));
      };
      const Vec6 v0 = xs.vec();
      const Vec6 k1 = deriv(xs);
      const Vec6 k2 = deriv(VehicleState::from_vec(v0 + 0.5 * dt * k1));
      const Vec6 k3 = deriv(VehicleState::from_vec(v0 + 0.5 * dt * k2));
      const Vec6 k4 = deriv(VehicleState::from_vec(v0 + dt * k3));
      xs = VehicleState::from_vec(v0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
      xs.vx = std::max(xs.vx, 0.0);
    }
    t.states[k + 1] = xs;
  }
  return t;
}

class ClosedLoopRunner {
public:
  ClosedLoopRunner(const Scenario & scn, Strategy strategy, bool measure_timing, const RunHooks * hooks)
  : scn_(scn),
    strategy_(strategy),
    timing_(measure_timing),
    hooks_(hooks),
    road_(scn.road.build()),
    x_ref_(scn.controller.reference_state())
  {
  }

  RunResult run()
  {
    const ControllerConfig & cc = scn_.controller;
    RunResult result;
    VehicleState x = scn_.initial;
    double t = 0.0;
    const double dt_plant = cc.Ts / scn_.plant_substeps;

    double disc_sq_sum = 0.0;
    bool terminal = false;

    while (t < scn_.duration - 1e-9 && !terminal) {
      // Terminal events on the measured state.
      const auto event = detect_event(x, t);
      if (event) {
        result.outcome = *event;
        terminal = true;
        break;
      }

      const auto t0 = std::chrono::steady_clock::now();
      cycle_index_ = result.cycles;
      CycleOutput cyc = control_cycle(x, t);
      const auto t1 = std::chrono::steady_clock::now();

      result.cycles += 1;
      result.max_certificate_violation =
        std::max(result.max_certificate_violation, cyc.certificate_violation);
      result.max_warm_input_violation =
        std::max(result.max_warm_input_violation, cyc.warm_input_violation);
      result.improvement_violations += cyc.improvement_violated ? 1 : 0;
      result.fallback_count += cyc.fallback ? 1 : 0;
      result.emergency_used = result.emergency_used || cyc.emergency;

      // Stage cost plus slack penalty on the realized state.
      const Vec6 dev = x.vec() - x_ref_.vec();
      const Vec2 uv = cyc.u.vec();
      const double j_step = dev.dot(cc.weights.Q * dev) + uv.dot(cc.weights.R * uv) +
                            cyc.slacks.dot(cc.slack.beta * cyc.slacks);
      result.J_cl += j_step;

      // Plant substeps.
      const double mu_act0 = scn_.friction.at(x.s);
      RealizedForces realized;
      VehicleState x_next = x;
      for (int i = 0; i < scn_.plant_substeps && !terminal; ++i) {
        auto [xs, rf] = plant_step(x_next, cyc.u, scn_.friction.at(x_next.s), dt_plant, scn_.vehicle, road_);
        if (i == 0) realized = rf;
        x_next = xs;
        const auto sub_event = detect_accident(x_next, t + (i + 1) * dt_plant);
        if (sub_event) {
          result.outcome = *sub_event;
          terminal = true;
        }
      }

      // Metrics.
      const double front_share = scn_.vehicle.front_axle_load() / scn_.vehicle.total_load();
      const Vec2 cmd_front(cyc.u.Fyf, front_share * cyc.u.Fx);
      const Vec2 real_front(realized.Fyf, realized.Fxf);
      disc_sq_sum += (cmd_front - real_front).squaredNorm();
      if (x.vx >= 1.0) {
        result.peak_side_slip = std::max(result.peak_side_slip, std::abs(std::atan(x.vy / x.vx)));
      }
      result.max_front_force_ratio = std::max(
        result.max_front_force_ratio,
        real_front.norm() / (mu_act0 * scn_.vehicle.front_axle_load()));

      StepRecord rec;
      rec.t = t;
      rec.x = x;
      rec.u_cmd = cyc.u;
      rec.realized = realized;
      rec.mu_est = mu_est_last_;
      rec.mu_act = mu_act0;
      rec.slacks = cyc.slacks;
      rec.qp_iters = cyc.qp_iters;
      rec.cycle_time_ms =
        timing_ ? std::chrono::duration<double, std::milli>(t1 - t0).count() : 0.0;
      rec.j_step = j_step;
      rec.emergency = cyc.emergency;
      result.trace.push_back(rec);

      x = x_next;
      t += cc.Ts;
    }

    if (!terminal) {
      result.outcome = end_of_run_outcome(x);
    }
    if (result.cycles > 0) {
      result.rms_front_discrepancy = std::sqrt(disc_sq_sum / result.cycles);
    }
    if (!scn_.obstacles.empty()) {
      result.s_obs_drawn = scn_.obstacles.front().s;
    }
    return result;
  }

private:
  std::optional<Outcome> detect_accident(const VehicleState & x, double t) const
  {
    if (std::abs(x.d) + scn_.controller.r_veh > road_.width(x.s)) {
      return Outcome::kOffRoad;
    }
    for (const Obstacle & o : visible_obstacles(scn_.obstacles, t)) {
      if (std::hypot(x.s - o.s, x.d - o.d) < scn_.controller.r_veh + o.radius) {
        return Outcome::kCollided;
      }
    }
    return std::nullopt;
  }

  std::optional<Outcome> detect_event(const VehicleState & x, double t) const
  {
    if (auto acc = detect_accident(x, t)) {
      return acc;
    }
    if (scn_.controller.target == ControllerConfig::Target::kStop && x.vx <= kSpeedEps) {
      return Outcome::kStoppedSafe;
    }
    if (scn_.controller.target == ControllerConfig::Target::kSpeed && !scn_.obstacles.empty()) {
      double pass_s = 0.0;
      for (const Obstacle & o : scn_.obstacles) pass_s = std::max(pass_s, o.s);
      if (x.s > pass_s + 15.0) {
        return Outcome::kPassedSafe;
      }
    }
    return std::nullopt;
  }

  Outcome end_of_run_outcome(const VehicleState & x) const
  {
    if (scn_.controller.target == ControllerConfig::Target::kSpeed) {
      return Outcome::kPassedSafe;
    }
    return x.vx <= kSpeedEps ? Outcome::kStoppedSafe : Outcome::kTimeout;
  }

  CycleOutput control_cycle(const VehicleState & x, double t)
  {
    const ControllerConfig & cc = scn_.controller;
    const EstimatorConfig est_cfg = effective_estimator_config();
    const FrictionEstimate mu = ctl_.estimator.step(t, scn_.friction, x.s, est_cfg);
    mu_est_last_ = mu.mu;
    const InputPolytope poly =
      build_input_constraints(mu.mu, scn_.vehicle, cc.actuator, cc.n_edges);
    const std::vector<Obstacle> obstacles = visible_obstacles(scn_.obstacles, t);

    CycleOutput out;
    try {
      switch (strategy_) {
        case Strategy::kSaaRti:
        case Strategy::kSaaRtiNonAdaptive:
          out = cycle_saa_rti(x, poly, obstacles);
          break;
        case Strategy::kSssMpc:
          out = cycle_sss_mpc(x, poly, obstacles);
          break;
        case Strategy::kSqpOracleLeft:
          out = cycle_sqp_oracle(x, poly, obstacles, +1.0);
          break;
        case Strategy::kSqpOracleRight:
          out = cycle_sqp_oracle(x, poly, obstacles, -1.0);
          break;
      }
    } catch (const NoFeasibleTrajectoryError &) {
      out = CycleOutput{};
      out.u = emergency_brake(poly, x, road_.curvature(x.s), scn_.vehicle);
      out.emergency = true;
      ctl_.prev_optimal =
        emergency_rollout(x, out.u, cc.N, cc.Ts, road_, scn_.vehicle);
      ctl_.prev_plan = ctl_.prev_optimal;
      ctl_.prev_qp.reset();
      ctl_.prev_structure.reset();
    }
    ctl_.u_prev = out.u;
    return out;
  }

  EstimatorConfig effective_estimator_config() const
  {
    EstimatorConfig cfg = scn_.estimator;
    if (strategy_ == Strategy::kSaaRtiNonAdaptive) {
      cfg.mode = EstimatorConfig::Mode::kStatic;
    }
    return cfg;
  }

  // Selection with the anti-procrastination envelope: prefer candidates that
  // satisfy it; fall back to the plain selection when none do.
  Trajectory select_with_envelope(
    std::vector<Trajectory> & candidates, const std::optional<Trajectory> & shifted,
    const InputPolytope & poly, const std::vector<Obstacle> & obstacles,
    const CostWeights & weights)
  {
    const ControllerConfig & cc = scn_.controller;
    CorridorParams cp = cc.corridor;
    cp.r_veh = cc.r_veh;
    cp.a_lat = 0.4 * poly.mu_used * scn_.vehicle.g;

    std::vector<Trajectory> filtered;
    filtered.reserve(candidates.size());
    for (const Trajectory & t : candidates) {
      if (satisfies_evasion_envelope(t, obstacles, cp)) {
        filtered.push_back(t);
      }
    }
    std::optional<Trajectory> shifted_ok;
    if (shifted && satisfies_evasion_envelope(*shifted, obstacles, cp)) {
      shifted_ok = shifted;
    }
    try {
      if (!filtered.empty() || shifted_ok) {
        Trajectory warm = select_trajectory(
          filtered, shifted_ok, poly, obstacles, road_, cc.r_veh, weights, x_ref_);
        candidates = std::move(filtered);
        return warm;
      }
    } catch (const NoFeasibleTrajectoryError &) {
    }
    return select_trajectory(
      candidates, shifted, poly, obstacles, road_, cc.r_veh, weights, x_ref_);
  }

  CycleOutput cycle_saa_rti(
    const VehicleState & x, const InputPolytope & poly, const std::vector<Obstacle> & obstacles)
  {
    const ControllerConfig & cc = scn_.controller;
    const TerminalStateGrid grid = make_terminal_grid(x, road_, cc.n_lateral, cc.r_veh);
    std::vector<Trajectory> candidates = sample_trajectories(
      x, ctl_.u_prev, grid, road_, cc.N, cc.Ts, scn_.vehicle, cc.n_segments);

    std::optional<Trajectory> shifted;
    if (ctl_.prev_optimal && speeds_nonnegative(*ctl_.prev_optimal)) {
      shifted = shift_trajectory(*ctl_.prev_optimal);
    }
    const Trajectory warm =
      select_with_envelope(candidates, shifted, poly, obstacles, cc.weights);
    if (hooks_ && hooks_->on_candidates) {
      hooks_->on_candidates(cycle_index_, candidates);
    }
    if (std::getenv("SAARTI_DEBUG_CYCLE")) {
      int n_ok = 0;
      for (const auto & c : candidates) {
        if (c.feasible && c.collision_free) ++n_ok;
      }
      std::fprintf(
        stderr, "cycle x=(%.2f,%.2f,v%.2f) ok=%d warm=%s idx=%d cost=%.1f dN=%.2f vN=%.2f\n",
        x.s, x.d, x.vx, n_ok, warm.source == Trajectory::Source::kSampled ? "sampled" : "shifted",
        warm.grid_index, warm.cost, warm.states.back().d, warm.states.back().vx);
    }

    // Linearize around the model rollout of the selected inputs from the
    // measured state; the kinematic candidate states are selection-side only.
    const Trajectory base = reroll_consistent(x, warm.inputs, cc.Ts, road_, scn_.vehicle);
    const std::vector<Jacobians> jacs = linearize_trajectory(base, road_, cc.Ts, scn_.vehicle);
    CorridorParams cp = cc.corridor;
    cp.r_veh = cc.r_veh;
    cp.v_max = scn_.v_max;
    cp.a_lat = 0.4 * poly.mu_used * scn_.vehicle.g;
    const StateCorridor corridor = build_corridor(base, obstacles, road_, cp);

    std::optional<QpWarmStart> qp_warm;
    if (ctl_.prev_qp && ctl_.prev_structure) {
      qp_warm = warm_start_shift(*ctl_.prev_qp, *ctl_.prev_structure);
    }
    QpProblem dumped;
    const bool want_qp = hooks_ && hooks_->on_qp;
    const OptimalTrajectory opt = optimize(
      base, corridor, poly, jacs, cc.weights, cc.slack, x, constant_reference(x_ref_, cc.N),
      cc.qp, qp_warm, want_qp ? &dumped : nullptr);
    if (want_qp) {
      hooks_->on_qp(cycle_index_, dumped);
    }

    ctl_.prev_optimal = trajectory_from_optimal(opt);
    ctl_.prev_qp = opt.qp;
    ctl_.prev_structure = opt.structure;

    CycleOutput out;
    out.u = opt.inputs.front();
    out.slacks = opt.slacks;
    out.qp_iters = opt.diag.qp_iterations;
    out.fallback = opt.diag.fell_back_to_warm;
    out.improvement_violated = opt.objective > opt.diag.objective_warm + 1e-6 * std::max(1.0, opt.diag.objective_warm);
    out.certificate_violation = opt.diag.certificate_violation;
    out.warm_input_violation = opt.diag.warm_input_violation;
    return out;
  }

  CycleOutput cycle_sss_mpc(
    const VehicleState & x, const InputPolytope & poly, const std::vector<Obstacle> & obstacles)
  {
    const ControllerConfig & cc = scn_.controller;
    const TerminalStateGrid grid = make_terminal_grid(x, road_, cc.n_lateral, cc.r_veh);
    std::vector<Trajectory> candidates = sample_trajectories(
      x, ctl_.u_prev, grid, road_, cc.N, cc.Ts, scn_.vehicle, cc.n_segments);

    std::optional<Trajectory> shifted;
    if (ctl_.prev_plan && speeds_nonnegative(*ctl_.prev_plan)) {
      shifted = shift_trajectory(*ctl_.prev_plan);
    }
    const Trajectory plan =
      select_with_envelope(candidates, shifted, poly, obstacles, cc.weights);
    if (hooks_ && hooks_->on_candidates) {
      hooks_->on_candidates(cycle_index_, candidates);
    }
    ctl_.prev_plan = plan;

    // Track the plan: per-step references to the geometric plan, a tight
    // corridor, the same QP machinery; linearized around the model rollout.
    const Trajectory base = reroll_consistent(x, plan.inputs, cc.Ts, road_, scn_.vehicle);
    const std::vector<Jacobians> jacs = linearize_trajectory(base, road_, cc.Ts, scn_.vehicle);
    CorridorParams cp = cc.corridor;
    cp.r_veh = cc.r_veh;
    cp.v_max = scn_.v_max;
    cp.a_lat = 0.4 * poly.mu_used * scn_.vehicle.g;
    const StateCorridor corridor = build_tracking_corridor(
      base, obstacles, road_, cp, cc.track_halfwidth, cc.track_ds, cc.track_dv);
    std::vector<Vec6> refs(plan.states.size());
    for (size_t k = 0; k < plan.states.size(); ++k) refs[k] = plan.states[k].vec();

    std::optional<QpWarmStart> qp_warm;
    if (ctl_.prev_qp && ctl_.prev_structure) {
      qp_warm = warm_start_shift(*ctl_.prev_qp, *ctl_.prev_structure);
    }
    const OptimalTrajectory opt = optimize(
      base, corridor, poly, jacs, cc.tracking_weights, cc.slack, x, refs, cc.qp, qp_warm);
    ctl_.prev_qp = opt.qp;
    ctl_.prev_structure = opt.structure;

    CycleOutput out;
    out.u = opt.inputs.front();
    out.slacks = opt.slacks;
    out.qp_iters = opt.diag.qp_iterations;
    out.fallback = opt.diag.fell_back_to_warm;
    out.certificate_violation = opt.diag.certificate_violation;
    out.warm_input_violation = opt.diag.warm_input_violation;
    return out;
  }

  CycleOutput cycle_sqp_oracle(
    const VehicleState & x, const InputPolytope & poly, const std::vector<Obstacle> & obstacles,
    double side_sign)
  {
    const ControllerConfig & cc = scn_.controller;
    Trajectory current;

    std::optional<Trajectory> shifted;
    if (ctl_.prev_optimal && speeds_nonnegative(*ctl_.prev_optimal)) {
      shifted = shift_trajectory(*ctl_.prev_optimal);
    }
    if (shifted && check_feasibility(*shifted, poly) &&
        check_collision(*shifted, obstacles, road_, cc.r_veh)) {
      current = *shifted;
    } else {
      // (Re-)initialize from the sampled set, restricted to the requested
      // passing side when an obstacle is in view.
      const TerminalStateGrid grid = make_terminal_grid(x, road_, cc.n_lateral, cc.r_veh);
      std::vector<Trajectory> candidates = sample_trajectories(
        x, ctl_.u_prev, grid, road_, cc.N, cc.Ts, scn_.vehicle, cc.n_segments);
      if (!obstacles.empty()) {
        std::vector<Trajectory> sided;
        for (Trajectory & c : candidates) {
          if (side_sign * side_of(c, obstacles.front()) >= 0.0) {
            sided.push_back(std::move(c));
          }
        }
        if (!sided.empty()) {
          candidates = std::move(sided);
        }
      }
      current = select_trajectory(
        candidates, std::nullopt, poly, obstacles, road_, cc.r_veh, cc.weights, x_ref_);
    }

    // Fully converged SQP: iterate linearize-solve with nonlinear re-rollout.
    CorridorParams cp = cc.corridor;
    cp.r_veh = cc.r_veh;
    cp.v_max = scn_.v_max;
    cp.a_lat = 0.4 * poly.mu_used * scn_.vehicle.g;
    OptimalTrajectory opt;
    int total_iters = 0;
    current = reroll_consistent(x, current.inputs, cc.Ts, road_, scn_.vehicle);
    for (int it = 0; it < 50; ++it) {
      const std::vector<Jacobians> jacs = linearize_trajectory(current, road_, cc.Ts, scn_.vehicle);
      const StateCorridor corridor = build_corridor(current, obstacles, road_, cp);
      opt = optimize(
        current, corridor, poly, jacs, cc.weights, cc.slack, x, constant_reference(x_ref_, cc.N),
        cc.qp, std::nullopt);
      total_iters += opt.diag.qp_iterations;
      double du = 0.0;
      for (size_t k = 0; k < opt.inputs.size(); ++k) {
        du = std::max(du, (opt.inputs[k].vec() - current.inputs[k].vec()).lpNorm<Eigen::Infinity>());
      }
      Trajectory rolled = reroll_consistent(x, opt.inputs, cc.Ts, road_, scn_.vehicle);
      if (!speeds_nonnegative(rolled)) {
        break;  // stopped inside the horizon: keep the previous iterate
      }
      current = std::move(rolled);
      if (du <= 1e-4) {
        break;
      }
    }

    ctl_.prev_optimal = current;

    CycleOutput out;
    out.u = current.inputs.front();
    out.slacks = opt.slacks;
    out.qp_iters = total_iters;
    out.fallback = opt.diag.fell_back_to_warm;
    out.certificate_violation = opt.diag.certificate_violation;
    out.warm_input_violation = opt.diag.warm_input_violation;
    return out;
  }

  const Scenario & scn_;
  Strategy strategy_;
  bool timing_;
  const RunHooks * hooks_ = nullptr;
  int cycle_index_ = 0;
  Centerline road_;
  VehicleState x_ref_;
  ControllerState ctl_;
  double mu_est_last_ = 0.0;
};

}  // namespace

RunResult run_closed_loop(
  const Scenario & scn, Strategy strategy, bool measure_timing, const RunHooks * hooks)
{
  scn.validate();
  ClosedLoopRunner runner(scn, strategy, measure_timing, hooks);
  return runner.run();
}

Scenario materialize_run(const Scenario & base, int run_index, std::uint64_t seed)
{
  Scenario scn = base;
  if (!base.mc_initial_conditions.empty()) {
    const auto & cond =
      base.mc_initial_conditions[static_cast<size_t>(run_index) % base.mc_initial_conditions.size()];
    scn.road = cond.road;
    scn.initial = cond.initial;
  }
  if (base.obstacle_range) {
    // Deterministic draw, identical across strategies for a (seed, run) pair.
    std::uint64_t state = seed ^ (0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(run_index) + 1));
    auto next_u64 = [&state]() {
      state ^= state << 13;
      state ^= state >> 7;
      state ^= state << 17;
      return state;
    };
    next_u64();
    const double unit = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    const ObstacleRange & r = *base.obstacle_range;
    Obstacle o;
    o.s = scn.initial.s + r.s_min + (r.s_max - r.s_min) * unit;
    o.d = r.d;
    o.radius = r.radius;
    o.appear_time = r.appear_time;
    scn.obstacles.push_back(o);
  }
  scn.seed = seed;
  return scn;
}

BatchResult run_monte_carlo(
  const Scenario & base, int n_runs, std::uint64_t seed, Strategy strategy, int jobs)
{
  if (n_runs < 1) {
    throw std::invalid_argument("run_monte_carlo: need at least one run");
  }
  BatchResult batch;
  batch.strategy = strategy;
  batch.condition = base.name;
  batch.n = n_runs;
  batch.runs.resize(static_cast<size_t>(n_runs));

  auto work = [&](int begin, int stride) {
    for (int i = begin; i < n_runs; i += stride) {
      const Scenario scn = materialize_run(base, i, seed);
      const RunResult res = run_closed_loop(scn, strategy);
      RunSummary & s = batch.runs[static_cast<size_t>(i)];
      s.run_index = i;
      s.s_obs = res.s_obs_drawn;
      s.outcome = res.outcome;
      s.J_cl = res.J_cl;
    }
  };

  const int n_threads = std::clamp(jobs, 1, n_runs);
  if (n_threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) {
      pool.emplace_back(work, t, n_threads);
    }
    for (auto & th : pool) th.join();
  }

  int n_acc = 0;
  double j_sum = 0.0;
  int n_ok = 0;
  for (const RunSummary & s : batch.runs) {
    if (is_accident(s.outcome)) {
      ++n_acc;
    } else {
      j_sum += s.J_cl;
      ++n_ok;
    }
  }
  batch.n_safe = n_ok;
  batch.P_acc = static_cast<double>(n_acc) / n_runs;
  batch.P_ci_half = 1.96 * std::sqrt(batch.P_acc * (1.0 - batch.P_acc) / n_runs);
  if (n_ok > 0) {
    batch.J_mean = j_sum / n_ok;
    double var = 0.0;
    for (const RunSummary & s : batch.runs) {
      if (!is_accident(s.outcome)) {
        var += (s.J_cl - batch.J_mean) * (s.J_cl - batch.J_mean);
      }
    }
    var = n_ok > 1 ? var / (n_ok - 1) : 0.0;
    batch.J_ci_half = 1.96 * std::sqrt(var / n_ok);
  }
  return batch;
}

}  // namespace saarti
