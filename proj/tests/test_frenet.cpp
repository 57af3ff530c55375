#include "saarti/frenet.hpp"

#include "saarti/vehicle_model.hpp"

#include <doctest.h>

#include <random>

using namespace saarti;

TEST_CASE("curvature interpolation is exact on constant-curvature roads")
{
  const Centerline road = Centerline::constant_curve(200.0, 50.0, 3.0);
  for (double s : {0.0, 13.7, 99.99, 200.0}) {
    CHECK(road.curvature(s) == doctest::Approx(0.02).epsilon(1e-14));
  }
  CHECK(road.width(123.4) == doctest::Approx(3.0));
}

TEST_CASE("curvature interpolation is continuous across breakpoints")
{
  const Centerline road = Centerline::from_breakpoints(
    {{0.0, 0.0, 3.0}, {50.0, 0.02, 3.0}, {100.0, 0.0, 3.0}});
  for (double s = 0.25; s < 99.5; s += 0.25) {
    const double left = road.curvature(s - 1e-9);
    const double right = road.curvature(s + 1e-9);
    CHECK(left == doctest::Approx(right).epsilon(1e-6));
  }
}

TEST_CASE("vehicle_to_planner collapses for centerline-aligned cruise")
{
  const Centerline road = Centerline::straight(100.0, 3.0);
  const VehicleState x{10, 0, 0, 0, 15, 0};
  const PlannerState g = vehicle_to_planner(x, ControlInput{}, road, VehicleParams{});
  CHECK(g.sdot == doctest::Approx(15.0));
  CHECK(g.ddot == doctest::Approx(0.0));
  CHECK(g.sddot == doctest::Approx(0.0));
  CHECK(g.dddot == doctest::Approx(0.0));
}

TEST_CASE("vehicle_to_planner at 90 degrees heading error")
{
  const Centerline road = Centerline::straight(100.0, 3.0);
  const VehicleState x{10, 0, std::numbers::pi / 2.0, 0, 10, 0};
  const PlannerState g = vehicle_to_planner(x, ControlInput{}, road, VehicleParams{});
  CHECK(g.sdot == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(g.ddot == doctest::Approx(10.0));
}

TEST_CASE("planner_to_vehicle basics")
{
  const Centerline road = Centerline::straight(100.0, 3.0);
  SUBCASE("straight cruise")
  {
    const VehicleState x = planner_to_vehicle(PlannerState{10, 0, 15, 0, 0, 0}, road);
    CHECK(x.dpsi == doctest::Approx(0.0));
    CHECK(x.vx == doctest::Approx(15.0));
    CHECK(x.vy == 0.0);
    CHECK(x.psidot == doctest::Approx(0.0));
  }
  SUBCASE("45 degrees when lateral rate equals tangential rate")
  {
    const VehicleState x = planner_to_vehicle(PlannerState{10, 0, 7, 7, 0, 0}, road);
    CHECK(x.dpsi == doctest::Approx(std::numbers::pi / 4.0));
  }
  SUBCASE("degenerate velocity raises")
  {
    CHECK_THROWS_AS(
      planner_to_vehicle(PlannerState{10, 0, 0.0, 0.0, 0, 0}, road), DegenerateVelocityError);
  }
}

TEST_CASE("reconstructed states satisfy the road-aligned kinematics")
{
  // Forward-substitution oracle: push the reconstructed state through the
  // kinematic rows and compare with the planner rates.
  const VehicleParams p;
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Centerline curve = Centerline::from_breakpoints(
    {{0.0, 0.0, 4.0}, {80.0, 0.015, 4.0}, {200.0, -0.01, 4.0}});
  for (int trial = 0; trial < 500; ++trial) {
    PlannerState g;
    g.s = 5.0 + 190.0 * 0.5 * (u(rng) + 1.0);
    g.d = 2.0 * u(rng);
    g.sdot = 2.0 + 12.0 * (u(rng) + 1.0);
    g.ddot = 3.0 * u(rng);
    g.sddot = 2.0 * u(rng);
    g.dddot = 2.0 * u(rng);
    const VehicleState x = planner_to_vehicle(g, curve);
    const double kappa = curve.curvature(g.s);
    const double denom = 1.0 - g.d * kappa;
    const double sdot_back = (x.vx * std::cos(x.dpsi) - x.vy * std::sin(x.dpsi)) / denom;
    const double ddot_back = x.vx * std::sin(x.dpsi) + x.vy * std::cos(x.dpsi);
    CHECK(sdot_back == doctest::Approx(g.sdot).epsilon(1e-9));
    CHECK(ddot_back == doctest::Approx(g.ddot).epsilon(1e-9));
  }
}

TEST_CASE("round trip reproduces side-slip-free states")
{
  const VehicleParams p;
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Centerline curve = Centerline::constant_curve(300.0, 120.0, 4.0);
  for (int trial = 0; trial < 300; ++trial) {
    VehicleState x;
    x.s = 10.0 + 100.0 * (u(rng) + 1.0);
    x.d = 2.0 * u(rng);
    x.dpsi = 0.5 * u(rng);
    x.vx = 2.0 + 10.0 * (u(rng) + 1.0);
    x.vy = 0.0;
    x.psidot = 0.5 * u(rng);
    const ControlInput in{4000.0 * u(rng), 5000.0 * u(rng)};
    const PlannerState g = vehicle_to_planner(x, in, curve, p);
    const VehicleState back = planner_to_vehicle(g, curve);
    CHECK(back.s == doctest::Approx(x.s).epsilon(1e-12));
    CHECK(back.d == doctest::Approx(x.d).epsilon(1e-12));
    CHECK(std::abs(back.dpsi - x.dpsi) <= 1e-9);
    CHECK(std::abs(back.vx - x.vx) <= 1e-9);
  }
}

TEST_CASE("frenet_to_cartesian")
{
  SUBCASE("anchor pose")
  {
    const Centerline road = Centerline::straight(50.0, 3.0);
    const Pose2 pose = road.to_cartesian(0.0, 0.0);
    CHECK(pose.x == doctest::Approx(0.0));
    CHECK(pose.y == doctest::Approx(0.0));
    CHECK(pose.heading == doctest::Approx(0.0));
  }
  SUBCASE("straight road offset")
  {
    const Centerline road = Centerline::straight(50.0, 3.0);
    const Pose2 pose = frenet_to_cartesian(VehicleState{10, 2, 0.1, 0, 0, 0}, road);
    CHECK(pose.x == doctest::Approx(10.0));
    CHECK(pose.y == doctest::Approx(2.0));
    CHECK(pose.heading == doctest::Approx(0.1));
  }
  SUBCASE("out of domain raises")
  {
    const Centerline road = Centerline::straight(50.0, 3.0);
    CHECK_THROWS_AS(road.to_cartesian(60.0, 0.0), std::out_of_range);
  }
  SUBCASE("curved road against fine numeric integration")
  {
    const Centerline road = Centerline::from_breakpoints(
      {{0.0, 0.0, 3.0}, {40.0, 0.025, 3.0}, {100.0, 0.025, 3.0}});
    // Oracle: midpoint integration of the heading at 0.1 mm steps.
    const double s_query = 77.3;
    double xs = 0.0, ys = 0.0, psi = 0.0;
    const long steps = 773000;
    const double h = s_query / static_cast<double>(steps);
    for (long i = 0; i < steps; ++i) {
      const double s_mid = (static_cast<double>(i) + 0.5) * h;
      const double k_mid = road.curvature(s_mid);
      xs += h * std::cos(psi + 0.5 * h * k_mid);
      ys += h * std::sin(psi + 0.5 * h * k_mid);
      psi += h * k_mid;
    }
    const Pose2 pose = road.to_cartesian(s_query, 0.0);
    CHECK(pose.x == doctest::Approx(xs).epsilon(1e-5));
    CHECK(pose.y == doctest::Approx(ys).epsilon(1e-5));
    CHECK(pose.heading == doctest::Approx(psi).epsilon(1e-6));
  }
  SUBCASE("constant curve lands on the analytic circle")
  {
    const double R = 60.0;
    const Centerline road = Centerline::constant_curve(200.0, R, 3.0);
    const double s = 45.0;
    const Pose2 pose = road.to_cartesian(s, 0.0);
    CHECK(pose.x == doctest::Approx(R * std::sin(s / R)).epsilon(1e-9));
    CHECK(pose.y == doctest::Approx(R * (1.0 - std::cos(s / R))).epsilon(1e-9));
  }
}
