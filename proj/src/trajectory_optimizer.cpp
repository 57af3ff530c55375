#include "saarti/trajectory_optimizer.hpp"

#include "saarti/vehicle_model.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cmath>

namespace saarti {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kWarmPad = 1e-6;

double warm_d_at(const Trajectory & warm, double s_query)
{
  const auto & st = warm.states;
  if (s_query <= st.front().s) return st.front().d;
  if (s_query >= st.back().s) return st.back().d;
  for (size_t k = 0; k + 1 < st.size(); ++k) {
    if (st[k].s <= s_query && s_query <= st[k + 1].s) {
      const double span = st[k + 1].s - st[k].s;
      if (span <= 0.0) return st[k].d;
      const double a = (s_query - st[k].s) / span;
      return (1.0 - a) * st[k].d + a * st[k + 1].d;
    }
  }
  return st.back().d;
}

}  // namespace

StateCorridor build_corridor(
  const Trajectory & warm, const std::vector<Obstacle> & obstacles, const Centerline & road,
  const CorridorParams & cp)
{
  const int N = warm.horizon();
  StateCorridor c;
  c.s_min.resize(static_cast<size_t>(N) + 1);
  c.s_max.resize(static_cast<size_t>(N) + 1);
  c.d_min.resize(static_cast<size_t>(N) + 1);
  c.d_max.resize(static_cast<size_t>(N) + 1);
  c.vx_min.resize(static_cast<size_t>(N) + 1);
  c.vx_max.resize(static_cast<size_t>(N) + 1);

  double max_step = 0.0;
  for (int k = 0; k < N; ++k) {
    max_step = std::max(max_step, warm.states[static_cast<size_t>(k) + 1].s - warm.states[static_cast<size_t>(k)].s);
  }

  for (int k = 0; k <= N; ++k) {
    const VehicleState & x = warm.states[static_cast<size_t>(k)];
    const double lane = road.width(x.s) - cp.r_veh;
    if (lane <= 0.0) {
      throw CorridorInversionError();
    }
    c.d_min[static_cast<size_t>(k)] = -lane;
    c.d_max[static_cast<size_t>(k)] = lane;
    c.s_min[static_cast<size_t>(k)] = x.s - cp.ds_back;
    c.s_max[static_cast<size_t>(k)] = x.s + cp.ds_fwd;
    c.vx_min[static_cast<size_t>(k)] = 0.0;
    c.vx_max[static_cast<size_t>(k)] = cp.v_max;
  }

  const double s_end = warm.states.back().s;
  for (const Obstacle & o : obstacles) {
    const double clearance = o.radius + cp.r_veh + cp.margin;
    const bool reaches = s_end > o.s - clearance;
    if (reaches) {
      const bool pass_left = warm_d_at(warm, o.s) >= o.d;
      // Lateral clearance of the projected obstacle disc, stretched
      // longitudinally against step-vs-position drift of the optimized plan
      // (bounded by the progress corridor). Ahead of the disc the bound
      // relaxes along the latest-feasible-evasion parabola, so deferring the
      // lateral motion beyond the last achievable point is priced now.
      const double s_pad = std::max(1.5, max_step) + std::max(cp.ds_back, cp.ds_fwd);
      for (int k = 0; k <= N; ++k) {
        const VehicleState & xk = warm.states[static_cast<size_t>(k)];
        const double gap = std::abs(xk.s - o.s) - s_pad;
        double need;
        if (gap < clearance) {
          need = std::sqrt(clearance * clearance - std::max(gap, 0.0) * std::max(gap, 0.0));
        } else if (xk.s < o.s) {
          const double tau = (gap - clearance) / std::max(xk.vx, 1.0);
          need = clearance - 0.5 * cp.a_lat * tau * tau;
          if (need <= 0.0) continue;
        } else {
          continue;
        }
        if (pass_left) {
          c.d_min[static_cast<size_t>(k)] = std::max(c.d_min[static_cast<size_t>(k)], o.d + need);
        } else {
          c.d_max[static_cast<size_t>(k)] = std::min(c.d_max[static_cast<size_t>(k)], o.d - need);
        }
      }
    } else if (std::abs(warm.states.back().d - o.d) < clearance) {
      // Warm start stops short of the obstacle in its lane: cap progress.
      for (int k = 0; k <= N; ++k) {
        c.s_max[static_cast<size_t>(k)] = std::min(c.s_max[static_cast<size_t>(k)], o.s - clearance);
      }
    }
  }

  // Open the corridor minimally so the warm start is strictly inside.
  for (int k = 0; k <= N; ++k) {
    const VehicleState & x = warm.states[static_cast<size_t>(k)];
    c.d_min[static_cast<size_t>(k)] = std::min(c.d_min[static_cast<size_t>(k)], x.d - kWarmPad);
    c.d_max[static_cast<size_t>(k)] = std::max(c.d_max[static_cast<size_t>(k)], x.d + kWarmPad);
    c.s_min[static_cast<size_t>(k)] = std::min(c.s_min[static_cast<size_t>(k)], x.s - kWarmPad);
    c.s_max[static_cast<size_t>(k)] = std::max(c.s_max[static_cast<size_t>(k)], x.s + kWarmPad);
    c.vx_min[static_cast<size_t>(k)] = std::min(c.vx_min[static_cast<size_t>(k)], x.vx - kWarmPad);
    c.vx_max[static_cast<size_t>(k)] = std::max(c.vx_max[static_cast<size_t>(k)], x.vx + kWarmPad);
  }
  return c;
}

StateCorridor build_tracking_corridor(
  const Trajectory & plan, const std::vector<Obstacle> & obstacles, const Centerline & road,
  const CorridorParams & cp, double track_halfwidth, double track_ds, double track_dv)
{
  CorridorParams tight = cp;
  tight.ds_back = track_ds;
  tight.ds_fwd = track_ds;
  StateCorridor c = build_corridor(plan, obstacles, road, tight);
  const int N = plan.horizon();
  for (int k = 0; k <= N; ++k) {
    const VehicleState & x = plan.states[static_cast<size_t>(k)];
    c.d_min[static_cast<size_t>(k)] = std::max(c.d_min[static_cast<size_t>(k)], x.d - track_halfwidth);
    c.d_max[static_cast<size_t>(k)] = std::min(c.d_max[static_cast<size_t>(k)], x.d + track_halfwidth);
    c.vx_min[static_cast<size_t>(k)] = std::max(c.vx_min[static_cast<size_t>(k)], x.vx - track_dv);
    c.vx_max[static_cast<size_t>(k)] = std::min(c.vx_max[static_cast<size_t>(k)], x.vx + track_dv);
    // Keep the plan inside after tightening.
    c.d_min[static_cast<size_t>(k)] = std::min(c.d_min[static_cast<size_t>(k)], x.d - kWarmPad);
    c.d_max[static_cast<size_t>(k)] = std::max(c.d_max[static_cast<size_t>(k)], x.d + kWarmPad);
    c.vx_min[static_cast<size_t>(k)] = std::min(c.vx_min[static_cast<size_t>(k)], x.vx - kWarmPad);
    c.vx_max[static_cast<size_t>(k)] = std::max(c.vx_max[static_cast<size_t>(k)], x.vx + kWarmPad);
  }
  return c;
}

double linearization_speed_floor(double Ts, const VehicleParams & p)
{
  // Forward Euler of the tire-relaxation rows goes unstable below
  // vx ~ Ts/2 * max(Car/m, Car*lr^2/Iz); keep a 20% margin.
  return 0.6 * Ts * std::max(p.Car / p.m, p.Car * p.lr * p.lr / p.Iz);
}

std::vector<Jacobians> linearize_trajectory(
  const Trajectory & warm, const Centerline & road, double Ts, const VehicleParams & p)
{
  const int N = warm.horizon();
  const double v_floor = linearization_speed_floor(Ts, p);
  std::vector<Jacobians> jacs(static_cast<size_t>(N));
  for (int k = 0; k < N; ++k) {
    VehicleState x = warm.states[static_cast<size_t>(k)];
    x.vx = std::max(x.vx, v_floor);
    jacs[static_cast<size_t>(k)] =
      linearize(x, warm.inputs[static_cast<size_t>(k)], Ts, road.curvature(x.s), p);
  }
  return jacs;
}

CondensedQp assemble_qp(
  const Trajectory & warm, const StateCorridor & corridor, const InputPolytope & poly,
  const std::vector<Jacobians> & jacobians, const CostWeights & weights,
  const SlackWeights & slack_w, const VehicleState & x_t, const std::vector<Vec6> & ref_states)
{
  const int N = warm.horizon();
  if (static_cast<int>(jacobians.size()) != N || corridor.steps() != N + 1 ||
      static_cast<int>(ref_states.size()) != N + 1) {
    throw std::logic_error("assemble_qp: dimension mismatch");
  }
  const int nu = 2 * N;
  const int nz = nu + 3;
  const int p_rows = poly.rows();
  const int m_rows = p_rows * N + 6 * (N + 1) + 3;

  CondensedQp out;
  out.n_inputs = N;
  out.polytope_rows = p_rows;
  out.structure.primal = {{2, N}, {3, 1}};
  out.structure.dual = {{p_rows, N}, {6, N + 1}, {3, 1}};

  // Rollout of the state deviation: dx_k = F_k + E_k * du.
  out.nominal.resize(static_cast<size_t>(N) + 1);
  out.input_to_state.resize(static_cast<size_t>(N) + 1);
  Vec6 F = x_t.vec() - warm.states.front().vec();
  Eigen::Matrix<double, 6, Eigen::Dynamic> E = Eigen::Matrix<double, 6, Eigen::Dynamic>::Zero(6, nu);
  out.nominal[0] = warm.states.front().vec() + F;
  out.input_to_state[0] = E;
  for (int k = 0; k < N; ++k) {
    const Jacobians & J = jacobians[static_cast<size_t>(k)];
    F = J.A * F;
    E = J.A * E;
    E.middleCols(2 * k, 2) += J.B;
    out.nominal[static_cast<size_t>(k) + 1] = warm.states[static_cast<size_t>(k) + 1].vec() + F;
    out.input_to_state[static_cast<size_t>(k) + 1] = E;
  }

  // Objective built over the stacked inputs, then the slack block.
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(nz, nz);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(nz);
  double offset = 0.0;
  for (int k = 0; k <= N; ++k) {
    const Mat6 & W = (k == N) ? weights.Qf : weights.Q;
    const Eigen::Matrix<double, 6, Eigen::Dynamic> & Ek = out.input_to_state[static_cast<size_t>(k)];
    const Vec6 r = out.nominal[static_cast<size_t>(k)] - ref_states[static_cast<size_t>(k)];
    const Eigen::Matrix<double, 6, Eigen::Dynamic> WE = W * Ek;
    P.topLeftCorner(nu, nu).noalias() += 2.0 * Ek.transpose() * WE;
    q.head(nu).noalias() += 2.0 * WE.transpose() * r;
    offset += r.dot(W * r);
  }
  for (int k = 0; k < N; ++k) {
    const Vec2 u_ref = warm.inputs[static_cast<size_t>(k)].vec();
    P.block(2 * k, 2 * k, 2, 2) += 2.0 * weights.R;
    q.segment(2 * k, 2) += 2.0 * weights.R * u_ref;
    offset += u_ref.dot(weights.R * u_ref);
  }
  P.bottomRightCorner(3, 3) = 2.0 * slack_w.beta;
  // Keep P exactly symmetric against accumulation roundoff.
  P = 0.5 * (P + P.transpose()).eval();

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m_rows, nz);
  Eigen::VectorXd l = Eigen::VectorXd::Constant(m_rows, -kInf);
  Eigen::VectorXd u = Eigen::VectorXd::Constant(m_rows, kInf);

  // Hard input rows: H * (u_warm + du_k) <= h.
  double input_violation = 0.0;
  int row = 0;
  for (int k = 0; k < N; ++k) {
    const Eigen::VectorXd rhs = poly.h - poly.H * warm.inputs[static_cast<size_t>(k)].vec();
    A.block(row, 2 * k, p_rows, 2) = poly.H;
    for (int i = 0; i < p_rows; ++i) {
      input_violation = std::max(input_violation, -rhs[i]);
      u[row + i] = std::max(rhs[i], 0.0);
    }
    row += p_rows;
  }
  out.warm_input_violation = input_violation;

  // Soft corridor rows: per step and coordinate, upper then lower.
  struct Coord {
    int idx;
    int slack;
    const std::vector<double> * lo;
    const std::vector<double> * hi;
  };
  const Coord coords[3] = {
    {kS, 0, &corridor.s_min, &corridor.s_max},
    {kD, 1, &corridor.d_min, &corridor.d_max},
    {kVx, 2, &corridor.vx_min, &corridor.vx_max},
  };
  for (int k = 0; k <= N; ++k) {
    for (const Coord & c : coords) {
      const double nom = out.nominal[static_cast<size_t>(k)][c.idx];
      const Eigen::RowVectorXd e = out.input_to_state[static_cast<size_t>(k)].row(c.idx);
      // upper: e*du - sigma <= hi - nom
      A.block(row, 0, 1, nu) = e;
      A(row, nu + c.slack) = -1.0;
      u[row] = std::max((*c.hi)[static_cast<size_t>(k)] - nom, 0.0);
      ++row;
      // lower: e*du + sigma >= lo - nom
      A.block(row, 0, 1, nu) = e;
      A(row, nu + c.slack) = 1.0;
      l[row] = std::min((*c.lo)[static_cast<size_t>(k)] - nom, 0.0);
      ++row;
    }
  }

  // Slack nonnegativity.
  for (int i = 0; i < 3; ++i) {
    A(row, nu + i) = 1.0;
    l[row] = 0.0;
    ++row;
  }

  // Certificate that (delta-u, sigma) = (0, 0) is feasible: l <= 0 <= u rowwise.
  double cert = 0.0;
  for (int i = 0; i < m_rows; ++i) {
    if (std::isfinite(l[i])) cert = std::max(cert, l[i]);
    if (std::isfinite(u[i])) cert = std::max(cert, -u[i]);
  }
  out.certificate_violation = std::max(cert, 0.0);

  out.prob = QpProblem{std::move(P), std::move(q), std::move(A), std::move(l), std::move(u)};
  out.objective_offset = offset;
  return out;
}

std::vector<Vec6> constant_reference(const VehicleState & x_ref, int N)
{
  return std::vector<Vec6>(static_cast<size_t>(N) + 1, x_ref.vec());
}

OptimalTrajectory optimize(
  const Trajectory & warm, const StateCorridor & corridor, const InputPolytope & poly,
  const std::vector<Jacobians> & jacobians, const CostWeights & weights,
  const SlackWeights & slack_w, const VehicleState & x_t, const std::vector<Vec6> & ref_states,
  const QpSettings & qp_settings, const std::optional<QpWarmStart> & qp_warm,
  QpProblem * keep_problem)
{
  const int N = warm.horizon();
  CondensedQp qp = assemble_qp(warm, corridor, poly, jacobians, weights, slack_w, x_t, ref_states);
  if (keep_problem) {
    *keep_problem = qp.prob;
  }

  std::optional<QpWarmStart> ws;
  if (qp_warm && qp_warm->z.size() == qp.prob.num_vars() && qp_warm->y.size() == qp.prob.num_cons()) {
    ws = qp_warm;
  }
  const QpSolution sol = solve_qp(qp.prob, qp_settings, ws);

  OptimalTrajectory out;
  out.qp = sol;
  out.structure = qp.structure;
  out.diag.qp_status = sol.status;
  out.diag.qp_iterations = sol.iterations;
  out.diag.qp_solves = 1;
  out.diag.primal_residual = sol.primal_residual;
  out.diag.dual_residual = sol.dual_residual;
  out.diag.objective_warm = qp.objective_offset;
  out.diag.warm_input_violation = qp.warm_input_violation;
  out.diag.certificate_violation = qp.certificate_violation;

  const double res_tol = 1e3 * std::max(qp_settings.eps_abs, qp_settings.eps_rel);
  const bool solver_ok = sol.status != QpStatus::kPrimalInfeasible &&
                         std::max(sol.primal_residual, sol.dual_residual) <= res_tol &&
                         sol.z.allFinite();
  const double obj_sol = sol.objective + qp.objective_offset;
  const bool improves = obj_sol <= qp.objective_offset + 1e-9 * std::max(1.0, std::abs(qp.objective_offset));

  Eigen::VectorXd z = Eigen::VectorXd::Zero(qp.prob.num_vars());
  if (solver_ok && improves) {
    z = sol.z;
    out.objective = obj_sol;
  } else {
    if (std::getenv("SAARTI_DEBUG_FALLBACK")) {
      std::fprintf(stderr, "fallback: status=%d it=%d rp=%g rd=%g obj=%g warm=%g\n",
        (int)sol.status, sol.iterations, sol.primal_residual, sol.dual_residual,
        obj_sol, qp.objective_offset);
    }
    out.diag.fell_back_to_warm = true;
    out.objective = qp.objective_offset;
  }

  const int nu = 2 * N;
  out.states.resize(static_cast<size_t>(N) + 1);
  out.inputs.resize(static_cast<size_t>(N));
  for (int k = 0; k <= N; ++k) {
    VehicleState xk = VehicleState::from_vec(
      qp.nominal[static_cast<size_t>(k)] + qp.input_to_state[static_cast<size_t>(k)] * z.head(nu));
    xk.vx = std::max(xk.vx, 0.0);  // stopping trajectories may overshoot zero
    out.states[static_cast<size_t>(k)] = xk;
  }
  for (int k = 0; k < N; ++k) {
    const Vec2 u = warm.inputs[static_cast<size_t>(k)].vec() + z.segment(2 * k, 2);
    out.inputs[static_cast<size_t>(k)] = ControlInput::from_vec(project_radially(poly, u));
  }
  out.slacks = z.tail(3).cwiseMax(0.0);
  return out;
}

}  // namespace saarti
