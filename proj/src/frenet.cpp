#include "saarti/frenet.hpp"

#include "saarti/vehicle_model.hpp"

#include <algorithm>
#include <cmath>

namespace saarti {

namespace {

// Heading change over [0, t] within a cell where kappa(sigma) = k0 + k1*sigma.
double heading_increment(double k0, double k1, double t)
{
  return k0 * t + 0.5 * k1 * t * t;
}

}  // namespace

Centerline Centerline::from_breakpoints(const std::vector<Breakpoint> & pts, const Pose2 & anchor)
{
  if (pts.size() < 2) {
    throw std::invalid_argument("centerline needs at least two breakpoints");
  }
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    if (!(pts[i + 1].s > pts[i].s)) {
      throw std::invalid_argument("centerline breakpoints must be strictly increasing in s");
    }
  }
  for (const auto & b : pts) {
    if (!(b.half_width > 0.0)) {
      throw std::invalid_argument("lane half-width must be positive");
    }
  }

  Centerline cl;
  cl.anchor_ = anchor;
  const double s0 = pts.front().s;
  const double s1 = pts.back().s;
  const int n = std::max(2, static_cast<int>(std::ceil((s1 - s0) / kGridDs)) + 1);

  auto interp = [&pts](double s, auto field) {
    auto it = std::upper_bound(
      pts.begin(), pts.end(), s, [](double v, const Breakpoint & b) { return v < b.s; });
    if (it == pts.begin()) return field(pts.front());
    if (it == pts.end()) return field(pts.back());
    const Breakpoint & hi = *it;
    const Breakpoint & lo = *(it - 1);
    const double a = (s - lo.s) / (hi.s - lo.s);
    return (1.0 - a) * field(lo) + a * field(hi);
  };

  cl.s_.resize(n);
  cl.kappa_.resize(n);
  cl.half_width_.resize(n);
  for (int i = 0; i < n; ++i) {
    const double s = std::min(s0 + i * kGridDs, s1);
    cl.s_[i] = s;
    cl.kappa_[i] = interp(s, [](const Breakpoint & b) { return b.kappa; });
    cl.half_width_[i] = interp(s, [](const Breakpoint & b) { return b.half_width; });
  }
  // Force an exact uniform grid except possibly the last cell.
  for (int i = 0; i + 1 < n; ++i) cl.s_[i] = s0 + i * kGridDs;

  // Integrate the Cartesian anchor table. Heading is exact for the
  // piecewise-linear curvature; positions use Simpson within each cell.
  cl.cx_.resize(n);
  cl.cy_.resize(n);
  cl.cpsi_.resize(n);
  cl.cx_[0] = anchor.x;
  cl.cy_[0] = anchor.y;
  cl.cpsi_[0] = anchor.heading;
  for (int i = 0; i + 1 < n; ++i) {
    const double h = cl.s_[i + 1] - cl.s_[i];
    const double k0 = cl.kappa_[i];
    const double k1 = (cl.kappa_[i + 1] - cl.kappa_[i]) / h;
    const double psi0 = cl.cpsi_[i];
    auto psi_at = [&](double t) { return psi0 + heading_increment(k0, k1, t); };
    cl.cpsi_[i + 1] = psi_at(h);
    // Composite Simpson with 4 panels per cell.
    double ix = 0.0, iy = 0.0;
    const int panels = 4;
    const double dt = h / (2 * panels);
    for (int j = 0; j < panels; ++j) {
      const double a = 2 * j * dt, mid = a + dt, b = a + 2 * dt;
      ix += (dt / 3.0) * (std::cos(psi_at(a)) + 4.0 * std::cos(psi_at(mid)) + std::cos(psi_at(b)));
      iy += (dt / 3.0) * (std::sin(psi_at(a)) + 4.0 * std::sin(psi_at(mid)) + std::sin(psi_at(b)));
    }
    cl.cx_[i + 1] = cl.cx_[i] + ix;
    cl.cy_[i + 1] = cl.cy_[i] + iy;
  }
  return cl;
}

Centerline Centerline::straight(double length, double half_width)
{
  return from_breakpoints({{0.0, 0.0, half_width}, {length, 0.0, half_width}});
}

Centerline Centerline::constant_curve(double length, double radius, double half_width)
{
  if (radius == 0.0) {
    throw std::invalid_argument("curve radius must be nonzero");
  }
  const double k = 1.0 / radius;
  return from_breakpoints({{0.0, k, half_width}, {length, k, half_width}});
}

double Centerline::clamp_s(double s) const
{
  return std::clamp(s, s_.front(), s_.back());
}

int Centerline::cell(double s) const
{
  const int i = static_cast<int>((s - s_.front()) / kGridDs);
  return std::clamp(i, 0, static_cast<int>(s_.size()) - 2);
}

double Centerline::curvature(double s) const
{
  s = clamp_s(s);
  const int i = cell(s);
  const double h = s_[i + 1] - s_[i];
  const double a = (s - s_[i]) / h;
  return (1.0 - a) * kappa_[i] + a * kappa_[i + 1];
}

double Centerline::curvature_deriv(double s) const
{
  s = clamp_s(s);
  const int i = cell(s);
  return (kappa_[i + 1] - kappa_[i]) / (s_[i + 1] - s_[i]);
}

double Centerline::width(double s) const
{
  s = clamp_s(s);
  const int i = cell(s);
  const double h = s_[i + 1] - s_[i];
  const double a = (s - s_[i]) / h;
  return (1.0 - a) * half_width_[i] + a * half_width_[i + 1];
}

Pose2 Centerline::to_cartesian(double s, double d) const
{
  if (s < s_.front() - 1e-9 || s > s_.back() + 1e-9) {
    throw std::out_of_range("arc length outside centerline domain");
  }
  s = clamp_s(s);
  const int i = cell(s);
  const double t = s - s_[i];
  const double h = s_[i + 1] - s_[i];
  const double k0 = kappa_[i];
  const double k1 = (kappa_[i + 1] - kappa_[i]) / h;
  const double psi0 = cpsi_[i];
  auto psi_at = [&](double u) { return psi0 + heading_increment(k0, k1, u); };

  // Simpson over the partial cell [0, t].
  double x = cx_[i], y = cy_[i];
  if (t > 0.0) {
    const double mid = 0.5 * t;
    x += (t / 6.0) * (std::cos(psi_at(0.0)) + 4.0 * std::cos(psi_at(mid)) + std::cos(psi_at(t)));
    y += (t / 6.0) * (std::sin(psi_at(0.0)) + 4.0 * std::sin(psi_at(mid)) + std::sin(psi_at(t)));
  }
  const double psi = psi_at(t);
  return Pose2{x - d * std::sin(psi), y + d * std::cos(psi), psi};
}

PlannerState vehicle_to_planner(
  const VehicleState & x, const ControlInput & u, const Centerline & road, const VehicleParams & p)
{
  const double kappa = road.curvature(x.s);
  const double denom = 1.0 - x.d * kappa;
  if (std::abs(denom) < kFrameEps) {
    throw SingularFrameError(denom);
  }

  const Vec6 dx = continuous_dynamics(x, u, kappa, p, rear_lateral_force(x, p));
  const double sdot = dx[kS];
  const double ddot = dx[kD];

  // Time derivatives of sdot and ddot along the dynamics:
  //   w = vx*cos(dpsi) - vy*sin(dpsi)
  //   wdot = vxdot*cos - vydot*sin - dpsidot * ddot
  //   sddot = wdot/denom + w * denomdot_negated / denom^2
  const double c = std::cos(x.dpsi);
  const double sn = std::sin(x.dpsi);
  const double w = x.vx * c - x.vy * sn;
  const double dpsidot = dx[kDpsi];
  const double vxdot = dx[kVx];
  const double vydot = dx[kVy];
  const double wdot = vxdot * c - vydot * sn - dpsidot * ddot;
  const double kappa_dot = road.curvature_deriv(x.s) * sdot;
  const double denom_dot = -(ddot * kappa + x.d * kappa_dot);
  const double sddot = wdot / denom - w * denom_dot / (denom * denom);
  const double dddot = vxdot * sn + vydot * c + dpsidot * w;

  return PlannerState{x.s, x.d, sdot, ddot, sddot, dddot};
}

VehicleState planner_to_vehicle(const PlannerState & g, const Centerline & road)
{
  const double kappa = road.curvature(g.s);
  const double kappa_d = road.curvature_deriv(g.s);
  const double denom = 1.0 - g.d * kappa;
  if (std::abs(denom) < kFrameEps) {
    throw SingularFrameError(denom);
  }

  // Planar velocity in the tangent/normal frame of the centerline:
  //   rdot = [sdot*denom, ddot]
  const double a1 = g.sdot * denom;
  const double a2 = g.ddot;
  const double v = std::hypot(a1, a2);
  if (v < kSpeedEps) {
    throw DegenerateVelocityError();
  }
  const double dpsi = std::atan2(a2, a1);

  // Planar acceleration components; the path curvature follows from the
  // planar cross product rdot x rddot / v^3.
  const double denom_dot = -(g.ddot * kappa + g.d * kappa_d * g.sdot);
  const double b1 = g.sddot * denom + g.sdot * denom_dot - kappa * g.sdot * g.ddot;
  const double b2 = kappa * g.sdot * g.sdot * denom + g.dddot;
  const double kappa_traj = (a1 * b2 - a2 * b1) / (v * v * v);

  VehicleState x;
  x.s = g.s;
  x.d = g.d;
  x.dpsi = dpsi;
  x.psidot = v * kappa_traj;
  x.vx = v;
  x.vy = 0.0;
  return x;
}

Pose2 frenet_to_cartesian(const VehicleState & x, const Centerline & road)
{
  Pose2 p = road.to_cartesian(x.s, x.d);
  p.heading += x.dpsi;
  return p;
}

}  // namespace saarti
