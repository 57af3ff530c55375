#include "saarti/trajectory_optimizer.hpp"

#include "saarti/vehicle_model.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace saarti;

namespace {

struct Setup {
  Centerline road = Centerline::straight(400.0, 2.0);
  VehicleParams params;
  CostWeights weights;
  SlackWeights slack;
  CorridorParams cp;
  QpSettings qp;
  int N = 40;
  double Ts = 0.05;

  Setup()
  {
    weights.Q = Vec6(0, 0.5, 1.0, 0.05, 0.3, 0.2).asDiagonal();
    weights.Qf = 2.0 * weights.Q;
    weights.R = Vec2(1e-8, 1e-8).asDiagonal();
    cp.r_veh = 1.0;
    cp.v_max = 40.0;
    qp.eps_abs = 1e-6;
    qp.eps_rel = 1e-6;
  }

  Trajectory cruise(double v, double d = 0.0) const
  {
    Trajectory t;
    t.states.resize(static_cast<size_t>(N) + 1);
    t.inputs.assign(static_cast<size_t>(N), ControlInput{});
    for (int k = 0; k <= N; ++k) {
      VehicleState x;
      x.s = 10.0 + v * Ts * k;
      x.d = d;
      x.vx = v;
      t.states[static_cast<size_t>(k)] = x;
    }
    return t;
  }
};

}  // namespace

TEST_CASE("corridor without obstacles is the shrunk lane")
{
  Setup s;
  const Trajectory warm = s.cruise(15.0);
  const StateCorridor c = build_corridor(warm, {}, s.road, s.cp);
  REQUIRE(c.steps() == s.N + 1);
  for (int k = 0; k <= s.N; ++k) {
    CHECK(c.d_min[static_cast<size_t>(k)] == doctest::Approx(-1.0));
    CHECK(c.d_max[static_cast<size_t>(k)] == doctest::Approx(1.0));
    CHECK(c.vx_min[static_cast<size_t>(k)] == doctest::Approx(0.0));
    CHECK(c.vx_max[static_cast<size_t>(k)] == doctest::Approx(40.0));
    CHECK(c.s_min[static_cast<size_t>(k)] == doctest::Approx(warm.states[static_cast<size_t>(k)].s - 2.0));
    CHECK(c.s_max[static_cast<size_t>(k)] == doctest::Approx(warm.states[static_cast<size_t>(k)].s + 5.0));
  }
}

TEST_CASE("corridor shuts the far side of a passed obstacle")
{
  Setup s;
  s.road = Centerline::straight(400.0, 3.5);
  const Trajectory warm = s.cruise(15.0, 1.8);  // passes left of the obstacle
  const Obstacle o{25.0, 0.0, 0.5, 0.0};
  const StateCorridor c = build_corridor(warm, {o}, s.road, s.cp);
  bool tightened = false;
  for (int k = 0; k <= s.N; ++k) {
    const double sk = warm.states[static_cast<size_t>(k)].s;
    if (std::abs(sk - o.s) <= 0.5 + 1.0 + 0.2) {
      CHECK(c.d_min[static_cast<size_t>(k)] >= 0.5 + 1.0 + 0.2 - 1e-9);
      tightened = true;
    }
  }
  CHECK(tightened);
}

TEST_CASE("corridor caps progress when the warm start stops short in lane")
{
  Setup s;
  s.road = Centerline::straight(400.0, 3.5);
  // Decelerating warm start that stays in lane and stops around s = 20.
  Trajectory warm;
  warm.states.resize(static_cast<size_t>(s.N) + 1);
  warm.inputs.assign(static_cast<size_t>(s.N), ControlInput{});
  double v = 8.0, pos = 10.0;
  for (int k = 0; k <= s.N; ++k) {
    VehicleState x;
    x.s = pos;
    x.vx = std::max(v, 0.2);
    warm.states[static_cast<size_t>(k)] = x;
    pos += std::max(v, 0.2) * s.Ts;
    v -= 0.3;
  }
  const Obstacle o{35.0, 0.0, 0.5, 0.0};
  const StateCorridor c = build_corridor(warm, {o}, s.road, s.cp);
  for (int k = 0; k <= s.N; ++k) {
    CHECK(c.s_max[static_cast<size_t>(k)] <= 35.0 - 1.7 + 1e-9);
  }
}

TEST_CASE("warm start lies strictly inside its corridor")
{
  Setup s;
  s.road = Centerline::straight(400.0, 3.5);
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double d = 2.4 * u(rng);
    const double v = 3.0 + 10.0 * (u(rng) + 1.0);
    const Trajectory warm = s.cruise(v, d);
    const Obstacle o{20.0 + 15.0 * (u(rng) + 1.0), 1.5 * u(rng), 0.5, 0.0};
    const StateCorridor c = build_corridor(warm, {o}, s.road, s.cp);
    for (int k = 0; k <= s.N; ++k) {
      const VehicleState & x = warm.states[static_cast<size_t>(k)];
      CHECK(x.d >= c.d_min[static_cast<size_t>(k)] - 1e-12);
      CHECK(x.d <= c.d_max[static_cast<size_t>(k)] + 1e-12);
      CHECK(x.s >= c.s_min[static_cast<size_t>(k)] - 1e-12);
      CHECK(x.s <= c.s_max[static_cast<size_t>(k)] + 1e-12);
      CHECK(x.vx >= c.vx_min[static_cast<size_t>(k)] - 1e-12);
      CHECK(x.vx <= c.vx_max[static_cast<size_t>(k)] + 1e-12);
    }
  }
}

TEST_CASE("lane narrower than the footprint raises")
{
  Setup s;
  s.road = Centerline::straight(400.0, 0.8);
  Trajectory warm = s.cruise(5.0);
  CHECK_THROWS_AS(build_corridor(warm, {}, s.road, s.cp), CorridorInversionError);
}

TEST_CASE("assembled QP accepts the warm start at zero deviation")
{
  Setup s;
  const Trajectory warm = s.cruise(15.0, 0.3);
  const InputPolytope poly = build_input_constraints(0.8, s.params, ActuatorLimits{}, 16);
  const auto jacs = linearize_trajectory(warm, s.road, s.Ts, s.params);
  const StateCorridor c = build_corridor(warm, {}, s.road, s.cp);

  // Measured state differs slightly from the warm start head.
  VehicleState x_t = warm.states.front();
  x_t.d += 0.02;
  x_t.vx -= 0.05;
  x_t.vy = 0.1;

  const CondensedQp qp = assemble_qp(
    warm, c, poly, jacs, s.weights, s.slack, x_t, constant_reference(VehicleState{}, s.N));
  CHECK(qp.certificate_violation == 0.0);
  CHECK(qp.warm_input_violation <= 1e-9);

  // Slack nonnegativity rows present: the last three rows bound sigma below.
  const Eigen::Index m = qp.prob.num_cons();
  for (int i = 0; i < 3; ++i) {
    CHECK(qp.prob.l[m - 3 + i] == 0.0);
    CHECK(qp.prob.A(m - 3 + i, qp.prob.num_vars() - 3 + i) == 1.0);
  }
}

TEST_CASE("zero-deviation warm start at the cost minimum stays put")
{
  Setup s;
  // Cruise at the reference speed on the centerline: unconstrained optimum of
  // the regulation cost, so the QP keeps delta-u ~ 0.
  const double v_ref = 15.0;
  const Trajectory warm = s.cruise(v_ref);
  const InputPolytope poly = build_input_constraints(0.8, s.params, ActuatorLimits{}, 16);
  const auto jacs = linearize_trajectory(warm, s.road, s.Ts, s.params);
  const StateCorridor c = build_corridor(warm, {}, s.road, s.cp);
  VehicleState ref;
  ref.vx = v_ref;
  const OptimalTrajectory opt = optimize(
    warm, c, poly, jacs, s.weights, s.slack, warm.states.front(), constant_reference(ref, s.N),
    s.qp);
  for (const ControlInput & u : opt.inputs) {
    CHECK(std::abs(u.Fyf) <= 2.0);  // a few newtons against ~1e4 N scale
    CHECK(std::abs(u.Fx) <= 2.0);
  }
  CHECK(opt.objective <= opt.diag.objective_warm + 1e-9);
}

TEST_CASE("optimizer improves on a suboptimal warm start and respects hard inputs")
{
  Setup s;
  s.road = Centerline::straight(400.0, 3.5);
  // Warm start holds speed; the reference wants a stop: the QP must brake.
  const Trajectory warm = s.cruise(15.0);
  const InputPolytope poly = build_input_constraints(0.8, s.params, ActuatorLimits{}, 16);
  const auto jacs = linearize_trajectory(warm, s.road, s.Ts, s.params);
  const StateCorridor c = build_corridor(warm, {}, s.road, s.cp);
  const OptimalTrajectory opt = optimize(
    warm, c, poly, jacs, s.weights, s.slack, warm.states.front(),
    constant_reference(VehicleState{}, s.N), s.qp);

  CHECK(opt.objective < opt.diag.objective_warm);
  CHECK(opt.inputs.front().Fx < -1000.0);
  for (const ControlInput & u : opt.inputs) {
    CHECK(poly.contains(u.vec(), 1e-12));
  }
  CHECK(opt.slacks.lpNorm<Eigen::Infinity>() <= 1e-4);
  CHECK((opt.states.front().vec() - warm.states.front().vec()).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(opt.diag.qp_solves == 1);
}

TEST_CASE("per-step reference tracking pulls toward the plan")
{
  Setup s;
  s.road = Centerline::straight(400.0, 3.5);
  const Trajectory plan = s.cruise(12.0, 0.8);
  Trajectory warm = plan;
  const InputPolytope poly = build_input_constraints(0.9, s.params, ActuatorLimits{}, 16);
  const auto jacs = linearize_trajectory(warm, s.road, s.Ts, s.params);
  const StateCorridor c = build_tracking_corridor(plan, {}, s.road, s.cp, 0.5, 2.0, 3.0);
  std::vector<Vec6> refs(plan.states.size());
  for (size_t k = 0; k < plan.states.size(); ++k) refs[k] = plan.states[k].vec();

  CostWeights track;
  track.Q = Vec6(0.2, 2.0, 1.0, 0.1, 2.0, 0.5).asDiagonal();
  track.Qf = 2.0 * track.Q;
  track.R = Vec2(1e-8, 1e-8).asDiagonal();

  // Start displaced from the plan.
  VehicleState x_t = plan.states.front();
  x_t.d -= 0.4;
  const OptimalTrajectory opt =
    optimize(warm, c, poly, jacs, track, s.slack, x_t, refs, s.qp);
  // The optimized head must steer back toward the plan (positive d force).
  CHECK(opt.inputs.front().Fyf > 100.0);
}

TEST_CASE("fallback to the warm start when the solver is starved")
{
  Setup s;
  const Trajectory warm = s.cruise(15.0);
  const InputPolytope poly = build_input_constraints(0.8, s.params, ActuatorLimits{}, 16);
  const auto jacs = linearize_trajectory(warm, s.road, s.Ts, s.params);
  const StateCorridor c = build_corridor(warm, {}, s.road, s.cp);
  QpSettings starved = s.qp;
  starved.max_iter = 1;
  starved.check_interval = 1;
  starved.polish = false;
  const OptimalTrajectory opt = optimize(
    warm, c, poly, jacs, s.weights, s.slack, warm.states.front(),
    constant_reference(VehicleState{}, s.N), starved);
  CHECK(opt.diag.fell_back_to_warm);
  CHECK(opt.objective == doctest::Approx(opt.diag.objective_warm));
  for (size_t k = 0; k < opt.inputs.size(); ++k) {
    CHECK(opt.inputs[k].Fyf == doctest::Approx(warm.inputs[k].Fyf));
    CHECK(opt.inputs[k].Fx == doctest::Approx(warm.inputs[k].Fx));
  }
}
