#include "saarti/sampling_planner.hpp"

#include "saarti/vehicle_model.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace saarti;

TEST_CASE("quintic: constant boundary gives the constant polynomial")
{
  const Vec6 boundary(3.5, 0, 0, 3.5, 0, 0);
  const QuinticCoeffs c = solve_quintic(boundary, 2.0);
  CHECK(c.a[0] == doctest::Approx(3.5));
  for (int i = 1; i < 6; ++i) {
    CHECK(std::abs(c.a[i]) <= 1e-12);
  }
}

TEST_CASE("quintic: unit rest-to-rest transfer")
{
  const Vec6 boundary(0, 0, 0, 1, 0, 0);
  const QuinticCoeffs c = solve_quintic(boundary, 1.0);
  CHECK(c.a[0] == doctest::Approx(0.0));
  CHECK(c.a[1] == doctest::Approx(0.0));
  CHECK(c.a[2] == doctest::Approx(0.0));
  CHECK(c.a[3] == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(c.a[4] == doctest::Approx(-15.0).epsilon(1e-9));
  CHECK(c.a[5] == doctest::Approx(6.0).epsilon(1e-9));
}

TEST_CASE("quintic residuals vanish on random boundary tuples")
{
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> tdist(0.5, 5.0);
  for (int trial = 0; trial < 500; ++trial) {
    Vec6 b;
    for (int i = 0; i < 6; ++i) b[i] = 5.0 * u(rng);
    const double T = tdist(rng);
    const QuinticCoeffs c = solve_quintic(b, T);
    const double scale = std::max(1.0, b.lpNorm<Eigen::Infinity>());
    CHECK(std::abs(c.value(0.0) - b[0]) <= 1e-9 * scale);
    CHECK(std::abs(c.first(0.0) - b[1]) <= 1e-9 * scale);
    CHECK(std::abs(c.second(0.0) - b[2]) <= 1e-9 * scale);
    CHECK(std::abs(c.value(T) - b[3]) <= 1e-9 * scale);
    CHECK(std::abs(c.first(T) - b[4]) <= 1e-9 * scale);
    CHECK(std::abs(c.second(T) - b[5]) <= 1e-9 * scale);
  }
}

TEST_CASE("longitudinal profile")
{
  SUBCASE("constant speed is a single affine piece")
  {
    const LongitudinalProfile prof = longitudinal_profile(2.0, 12.0, 12.0, 2.0, 4);
    for (double t : {0.0, 0.7, 1.3, 2.0}) {
      CHECK(prof.position(t) == doctest::Approx(2.0 + 12.0 * t).epsilon(1e-12));
      CHECK(prof.speed(t) == doctest::Approx(12.0));
    }
  }
  SUBCASE("two-segment deceleration matches hand integration")
  {
    const LongitudinalProfile prof = longitudinal_profile(0.0, 15.0, 0.0, 2.0, 2);
    CHECK(prof.speed(0.0) == doctest::Approx(15.0));
    CHECK(prof.speed(1.5) == doctest::Approx(7.5));
    CHECK(prof.position(2.0) == doctest::Approx(22.5).epsilon(1e-12));
  }
  SUBCASE("position is nondecreasing for nonnegative speeds")
  {
    const LongitudinalProfile prof = longitudinal_profile(0.0, 8.0, 1.0, 3.0, 6);
    double prev = prof.position(0.0);
    for (double t = 0.05; t <= 3.0 + 1e-12; t += 0.05) {
      const double cur = prof.position(t);
      CHECK(cur >= prev - 1e-12);
      prev = cur;
    }
  }
}

namespace {

struct Setup {
  Centerline road = Centerline::straight(400.0, 3.5);
  VehicleParams params;
  CostWeights weights;
  VehicleState x0{10, 0, 0, 0, 15, 0};
  int N = 40;
  double Ts = 0.05;

  Setup()
  {
    weights.Q = Vec6(0, 0.5, 1.0, 0.05, 0.3, 0.2).asDiagonal();
    weights.Qf = 2.0 * weights.Q;
    weights.R = Vec2(1e-8, 1e-8).asDiagonal();
  }
};

}  // namespace

TEST_CASE("sampling produces one candidate per grid pair")
{
  Setup s;
  TerminalStateGrid grid;
  grid.lateral_offsets = {-2.0, -1.0, 0.0, 1.0, 2.0, -1.5, -0.5, 0.5, 1.5};
  grid.speeds = {0.0, 7.5, 15.0};
  const auto trajs = sample_trajectories(s.x0, ControlInput{}, grid, s.road, s.N, s.Ts, s.params, s.N);
  CHECK(trajs.size() == 27);
  for (const Trajectory & t : trajs) {
    CHECK(t.states.size() == static_cast<size_t>(s.N) + 1);
    CHECK(t.inputs.size() == static_cast<size_t>(s.N));
  }
}

TEST_CASE("straight constant-speed candidate needs no forces")
{
  Setup s;
  TerminalStateGrid grid;
  grid.lateral_offsets = {0.0};
  grid.speeds = {15.0};
  const auto trajs = sample_trajectories(s.x0, ControlInput{}, grid, s.road, s.N, s.Ts, s.params, s.N);
  REQUIRE(trajs.size() == 1);
  for (const ControlInput & u : trajs[0].inputs) {
    CHECK(std::abs(u.Fyf) <= 1e-6);
    CHECK(std::abs(u.Fx) <= 1e-6);
  }
}

TEST_CASE("sampled states satisfy the road-aligned kinematic rates")
{
  Setup s;
  s.x0.vy = 0.4;  // off-nominal start
  s.x0.dpsi = 0.05;
  const TerminalStateGrid grid = make_terminal_grid(s.x0, s.road, 9, 1.0);
  const auto trajs = sample_trajectories(s.x0, ControlInput{0, -500}, grid, s.road, s.N, s.Ts, s.params, s.N);
  REQUIRE(!trajs.empty());
  for (const Trajectory & t : trajs) {
    for (size_t k = 0; k + 1 < t.states.size(); ++k) {
      const VehicleState & a = t.states[k];
      const VehicleState & b = t.states[k + 1];
      // Velocity rows are reproduced exactly by the recovered inputs.
      double res = 0.0;
      const ControlInput u = equivalent_input(a, b, s.Ts, s.params, &res);
      const double Fyr = rear_lateral_force(a, s.params);
      CHECK(b.vx - a.vx == doctest::Approx(s.Ts * u.Fx / s.params.m).epsilon(1e-9));
      CHECK(
        b.vy - a.vy ==
        doctest::Approx(s.Ts * ((u.Fyf + Fyr) / s.params.m - a.vx * a.psidot)).epsilon(1e-9));
    }
  }
}

TEST_CASE("feasibility check against the adaptive polytope")
{
  Setup s;
  const InputPolytope poly = build_input_constraints(0.8, s.params, ActuatorLimits{}, 16);

  SUBCASE("zero-input straight trajectory passes")
  {
    TerminalStateGrid grid;
    grid.lateral_offsets = {0.0};
    grid.speeds = {15.0};
    const auto trajs = sample_trajectories(s.x0, ControlInput{}, grid, s.road, s.N, s.Ts, s.params, s.N);
    REQUIRE(trajs.size() == 1);
    CHECK(check_feasibility(trajs[0], poly));
  }
  SUBCASE("aggressive swerve fails on low friction")
  {
    const InputPolytope tiny = build_input_constraints(0.1, s.params, ActuatorLimits{}, 16);
    TerminalStateGrid grid;
    grid.lateral_offsets = {2.5};
    grid.speeds = {15.0};
    const auto trajs = sample_trajectories(s.x0, ControlInput{}, grid, s.road, s.N, s.Ts, s.params, s.N);
    REQUIRE(trajs.size() == 1);
    // Peak lateral acceleration of the rest-to-rest quintic exceeds 0.1 g.
    CHECK_FALSE(check_feasibility(trajs[0], tiny));
  }
  SUBCASE("feasibility is monotone in friction")
  {
    const TerminalStateGrid grid = make_terminal_grid(s.x0, s.road, 9, 1.0);
    const auto trajs = sample_trajectories(s.x0, ControlInput{}, grid, s.road, s.N, s.Ts, s.params, s.N);
    const InputPolytope lo = build_input_constraints(0.4, s.params, ActuatorLimits{}, 16);
    const InputPolytope hi = build_input_constraints(0.9, s.params, ActuatorLimits{}, 16);
    for (const Trajectory & t : trajs) {
      if (check_feasibility(t, lo)) {
        CHECK(check_feasibility(t, hi));
      }
    }
  }
}

TEST_CASE("collision checking")
{
  Setup s;
  TerminalStateGrid grid;
  grid.lateral_offsets = {0.0};
  grid.speeds = {15.0};
  const auto trajs = sample_trajectories(s.x0, ControlInput{}, grid, s.road, s.N, s.Ts, s.params, s.N);
  REQUIRE(trajs.size() == 1);
  const Trajectory & t = trajs[0];
  const double r_veh = 1.0;

  SUBCASE("no obstacles") { CHECK(check_collision(t, {}, s.road, r_veh)); }
  SUBCASE("obstacle on a trajectory point")
  {
    const Obstacle o{t.states[20].s, t.states[20].d, 0.5, 0.0};
    CHECK_FALSE(check_collision(t, {o}, s.road, r_veh));
  }
  SUBCASE("grazing clearance passes")
  {
    const Obstacle o{t.states[20].s, t.states[20].d + r_veh + 0.5 + 1e-9, 0.5, 0.0};
    CHECK(check_collision(t, {o}, s.road, r_veh));
  }
  SUBCASE("lane departure fails")
  {
    Trajectory wide = t;
    wide.states[5].d = 2.6;  // 2.6 + 1.0 > 3.5
    CHECK_FALSE(check_collision(wide, {}, s.road, r_veh));
  }
}

TEST_CASE("cost evaluation")
{
  Setup s;
  const VehicleState x_ref{0, 0, 0, 0, 0, 0};

  SUBCASE("trajectory at the reference with zero inputs costs nothing")
  {
    Trajectory t;
    t.states.assign(3, x_ref);
    t.inputs.assign(2, ControlInput{});
    CHECK(evaluate_cost(t, s.weights, x_ref) == doctest::Approx(0.0));
  }
  SUBCASE("input term is quadratic")
  {
    Trajectory t;
    t.states.assign(3, x_ref);
    t.inputs.assign(2, ControlInput{100.0, -200.0});
    const double j1 = evaluate_cost(t, s.weights, x_ref);
    for (auto & u : t.inputs) {
      u.Fyf *= 2.0;
      u.Fx *= 2.0;
    }
    const double j4 = evaluate_cost(t, s.weights, x_ref);
    CHECK(j4 == doctest::Approx(4.0 * j1).epsilon(1e-12));
  }
  SUBCASE("single-step scalar case")
  {
    CostWeights w;
    w.Q = Mat6::Zero();
    w.Q(kD, kD) = 1.0;
    w.Qf = Mat6::Zero();
    w.R = Mat2::Zero();
    w.R(0, 0) = 1.0;
    Trajectory t;
    VehicleState dev;
    dev.d = 3.0;
    t.states = {dev, VehicleState{}};
    t.inputs = {ControlInput{2.0, 0.0}};
    CHECK(evaluate_cost(t, w, VehicleState{}) == doctest::Approx(13.0));
  }
}

TEST_CASE("selection")
{
  Setup s;
  const InputPolytope poly = build_input_constraints(0.9, s.params, ActuatorLimits{}, 16);
  const VehicleState x_ref{0, 0, 0, 0, 0, 0};
  const TerminalStateGrid grid = make_terminal_grid(s.x0, s.road, 9, 1.0);
  auto cands = sample_trajectories(s.x0, ControlInput{}, grid, s.road, s.N, s.Ts, s.params, s.N);

  SUBCASE("single feasible candidate wins")
  {
    const auto it = std::find_if(cands.begin(), cands.end(), [&](const Trajectory & t) {
      return check_feasibility(t, poly) && check_collision(t, {}, s.road, 1.0);
    });
    REQUIRE(it != cands.end());
    std::vector<Trajectory> one = {*it};
    const Trajectory sel =
      select_trajectory(one, std::nullopt, poly, {}, s.road, 1.0, s.weights, x_ref);
    CHECK(sel.grid_index == it->grid_index);
  }
  SUBCASE("selected trajectory passes both checks and is the argmin")
  {
    auto copy = cands;
    const Trajectory sel =
      select_trajectory(copy, std::nullopt, poly, {}, s.road, 1.0, s.weights, x_ref);
    CHECK(check_feasibility(sel, poly));
    CHECK(check_collision(sel, {}, s.road, 1.0));
    // Brute-force re-evaluation oracle.
    double best = std::numeric_limits<double>::infinity();
    for (const Trajectory & t : cands) {
      if (check_feasibility(t, poly) && check_collision(t, {}, s.road, 1.0)) {
        best = std::min(best, evaluate_cost(t, s.weights, x_ref));
      }
    }
    CHECK(sel.cost == doctest::Approx(best));
  }
  SUBCASE("strictly cheaper shifted previous optimum wins")
  {
    auto copy = cands;
    Trajectory prev = cands[0];
    // Make a trajectory that is exactly at the reference except for speed.
    const Trajectory sel0 =
      select_trajectory(copy, std::nullopt, poly, {}, s.road, 1.0, s.weights, x_ref);
    Trajectory cheaper = sel0;
    for (auto & st : cheaper.states) {
      st.d = 0.0;
      st.dpsi = 0.0;
      st.psidot = 0.0;
      st.vx = 0.05;
      st.vy = 0.0;
    }
    for (auto & u : cheaper.inputs) u = ControlInput{};
    const Trajectory shifted_src = cheaper;
    auto copy2 = cands;
    const Trajectory sel = select_trajectory(
      copy2, shift_trajectory(shifted_src), poly, {}, s.road, 1.0, s.weights, x_ref);
    CHECK(sel.source == Trajectory::Source::kShiftedPrevious);
  }
  SUBCASE("equal costs break toward the lower grid index")
  {
    const auto it = std::find_if(cands.begin(), cands.end(), [&](const Trajectory & t) {
      return check_feasibility(t, poly) && check_collision(t, {}, s.road, 1.0);
    });
    REQUIRE(it != cands.end());
    std::vector<Trajectory> two = {*it, *it};
    two[0].grid_index = 7;
    two[1].grid_index = 4;
    const Trajectory sel =
      select_trajectory(two, std::nullopt, poly, {}, s.road, 1.0, s.weights, x_ref);
    CHECK(sel.grid_index == 4);
  }
  SUBCASE("nothing feasible raises")
  {
    const InputPolytope tiny = build_input_constraints(0.01, s.params, ActuatorLimits{}, 16);
    std::vector<Trajectory> braking;
    for (const Trajectory & t : cands) {
      if (t.grid_index % 3 == 0) braking.push_back(t);  // terminal speed 0 candidates
    }
    REQUIRE(!braking.empty());
    CHECK_THROWS_AS(
      select_trajectory(braking, std::nullopt, tiny, {}, s.road, 1.0, s.weights, x_ref),
      NoFeasibleTrajectoryError);
  }
}

TEST_CASE("shift consistency")
{
  Setup s;
  const TerminalStateGrid grid = make_terminal_grid(s.x0, s.road, 5, 1.0);
  const auto cands = sample_trajectories(s.x0, ControlInput{}, grid, s.road, s.N, s.Ts, s.params, s.N);
  const Trajectory & prev = cands[4];
  const Trajectory shifted = shift_trajectory(prev);
  CHECK(shifted.states.size() == prev.states.size());
  CHECK(shifted.inputs.size() == prev.inputs.size());
  CHECK((shifted.states.front().vec() - prev.states[1].vec()).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((shifted.states.back().vec() - prev.states.back().vec()).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(
    (shifted.states[shifted.states.size() - 2].vec() - prev.states.back().vec())
      .lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(shifted.inputs.back().Fx == prev.inputs.back().Fx);
  CHECK(shifted.source == Trajectory::Source::kShiftedPrevious);
}
