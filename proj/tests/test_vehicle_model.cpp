#include "saarti/vehicle_model.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace saarti;

namespace {

VehicleParams params()
{
  return VehicleParams{};  // 1500 kg single-track defaults
}

}  // namespace

TEST_CASE("straight coasting has zero lateral derivatives")
{
  const VehicleState x{0, 0, 0, 0, 15, 0};
  const Vec6 dx = continuous_dynamics(x, ControlInput{0, 0}, 0.0, params(), 0.0);
  CHECK(dx[kS] == doctest::Approx(15.0));
  for (int i = 1; i < 6; ++i) {
    CHECK(dx[i] == doctest::Approx(0.0));
  }
}

TEST_CASE("longitudinal force accelerates by Fx/m")
{
  const VehicleState x{0, 0, 0, 0, 15, 0};
  const Vec6 dx = continuous_dynamics(x, ControlInput{0, 1500}, 0.0, params(), 0.0);
  CHECK(dx[kVx] == doctest::Approx(1.0));
}

TEST_CASE("progress rate includes the frame denominator")
{
  const VehicleState x{0, 1, 0, 0, 10, 0};
  const Vec6 dx = continuous_dynamics(x, ControlInput{0, 0}, 0.1, params(), 0.0);
  CHECK(dx[kS] == doctest::Approx(10.0 / 0.9).epsilon(1e-12));
}

TEST_CASE("singular frame raises")
{
  const VehicleState x{0, 10.0, 0, 0, 10, 0};
  CHECK_THROWS_AS(continuous_dynamics(x, ControlInput{}, 0.1, params(), 0.0), SingularFrameError);
}

TEST_CASE("rear lateral force")
{
  const VehicleParams p = params();
  SUBCASE("zero slip")
  {
    CHECK(rear_lateral_force(VehicleState{0, 0, 0, 0, 10, 0}, p) == doctest::Approx(0.0));
  }
  SUBCASE("hand-evaluated slip")
  {
    const VehicleState x{0, 0, 0, 0, 10, 0.1};
    const double expected = -p.Car * std::atan(0.1 / 10.0);
    CHECK(rear_lateral_force(x, p) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(-1799.94).epsilon(1e-4));
  }
  SUBCASE("slip vanishes when vy equals lr*psidot")
  {
    const double psidot = 0.3;
    const VehicleState x{0, 0, 0, psidot, 17.0, p.lr * psidot};
    CHECK(rear_lateral_force(x, p) == doctest::Approx(0.0));
  }
}

TEST_CASE("discrete step basics")
{
  const VehicleParams p = params();
  const VehicleState x{3, 0, 0, 0, 15, 0};
  SUBCASE("zero step is identity")
  {
    const VehicleState x1 = discrete_step(x, ControlInput{}, 0.0, 0.0, p);
    CHECK((x1.vec() - x.vec()).lpNorm<Eigen::Infinity>() == 0.0);
  }
  SUBCASE("straight coasting advances by Ts*vx")
  {
    const VehicleState x1 = discrete_step(x, ControlInput{}, 0.05, 0.0, p);
    CHECK(x1.s == doctest::Approx(3.75));
    CHECK(x1.vx == doctest::Approx(15.0));
    CHECK(x1.d == doctest::Approx(0.0));
  }
}

TEST_CASE("discrete step is the Euler map of the continuous dynamics")
{
  const VehicleParams p = params();
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    VehicleState x;
    x.s = 50.0 * (u(rng) + 1.0);
    x.d = 1.5 * u(rng);
    x.dpsi = 0.4 * u(rng);
    x.psidot = 0.6 * u(rng);
    x.vx = 1.0 + 14.0 * (u(rng) + 1.0);
    x.vy = 1.0 * u(rng);
    const ControlInput in{6000.0 * u(rng), 8000.0 * u(rng)};
    const double kappa = 0.02 * u(rng);
    const double Ts = 0.05;
    const Vec6 expected =
      x.vec() + Ts * continuous_dynamics(x, in, kappa, p, rear_lateral_force(x, p));
    const Vec6 got = discrete_step(x, in, Ts, kappa, p).vec();
    CHECK((got - expected).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("symmetry: straight road with no lateral excitation stays exact")
{
  const VehicleParams p = params();
  VehicleState x{0, 0, 0, 0, 20, 0};
  for (int k = 0; k < 100; ++k) {
    x = discrete_step(x, ControlInput{0.0, -2000.0}, 0.05, 0.0, p);
  }
  CHECK(x.d == 0.0);
  CHECK(x.dpsi == 0.0);
  CHECK(x.psidot == 0.0);
  CHECK(x.vy == 0.0);
}

TEST_CASE("analytic jacobians: structural entries")
{
  const VehicleParams p = params();
  const double Ts = 0.05;
  const VehicleState x{0, 0, 0, 0, 15, 0};
  const Jacobians J = linearize(x, ControlInput{}, Ts, 0.0, p);
  CHECK(J.A(kS, kVx) == doctest::Approx(Ts).epsilon(1e-12));
  CHECK(J.B(kVx, 1) == doctest::Approx(Ts / p.m).epsilon(1e-12));
  CHECK(J.B(kVx, 0) == 0.0);
}

TEST_CASE("linearize guards against nonpositive reference speed")
{
  CHECK_THROWS_AS(
    linearize(VehicleState{0, 0, 0, 0, 0, 0}, ControlInput{}, 0.05, 0.0, params()),
    std::domain_error);
}

TEST_CASE("jacobians match central finite differences over the envelope")
{
  const VehicleParams p = params();
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    VehicleState x;
    x.s = 100.0 * (u(rng) + 1.0);
    x.vx = 1.0 + 14.5 * (u(rng) + 1.0);  // [1, 30]
    const double kappa = 0.03 * u(rng);
    // keep |d*kappa| <= 0.5
    x.d = (kappa != 0.0) ? 0.5 * u(rng) * std::min(1.0 / std::abs(kappa), 3.0) : 3.0 * u(rng);
    x.dpsi = 0.5 * u(rng);
    x.psidot = 0.8 * u(rng);
    x.vy = 2.0 * u(rng);
    const ControlInput in{7000.0 * u(rng), 9000.0 * u(rng)};
    const Jacobians analytic = linearize(x, in, 0.05, kappa, p);
    const Jacobians fd = test::fd_jacobians(x, in, 0.05, kappa, p);
    const double ea = (analytic.A - fd.A).lpNorm<Eigen::Infinity>() /
                      std::max(1.0, fd.A.lpNorm<Eigen::Infinity>());
    const double eb = (analytic.B - fd.B).lpNorm<Eigen::Infinity>() /
                      std::max(1.0, fd.B.lpNorm<Eigen::Infinity>());
    worst = std::max({worst, ea, eb});
  }
  CHECK(worst <= 1e-5);
}
