#include "saarti/input_constraints.hpp"

#include <cmath>
#include <numbers>

namespace saarti {

namespace {

// Halfspace a.dot(u) <= b with b > 0 (origin strictly interior).
struct Halfspace {
  Vec2 a;
  double b;
};

// Clip a convex CCW polygon by a halfspace (Sutherland-Hodgman step).
std::vector<Vec2> clip(const std::vector<Vec2> & poly, const Halfspace & hs)
{
  std::vector<Vec2> out;
  const size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    const Vec2 & p = poly[i];
    const Vec2 & q = poly[(i + 1) % n];
    const double fp = hs.a.dot(p) - hs.b;
    const double fq = hs.a.dot(q) - hs.b;
    if (fp <= 0.0) {
      out.push_back(p);
    }
    if ((fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0)) {
      const double t = fp / (fp - fq);
      out.push_back(p + t * (q - p));
    }
  }
  return out;
}

// Drop duplicate and collinear vertices of a CCW polygon.
std::vector<Vec2> simplify(std::vector<Vec2> poly, double scale)
{
  const double tol = 1e-12 * std::max(scale, 1.0);
  std::vector<Vec2> dedup;
  for (const Vec2 & v : poly) {
    if (dedup.empty() || (v - dedup.back()).norm() > tol) {
      dedup.push_back(v);
    }
  }
  while (dedup.size() > 1 && (dedup.front() - dedup.back()).norm() <= tol) {
    dedup.pop_back();
  }
  if (dedup.size() < 3) {
    return dedup;
  }
  std::vector<Vec2> out;
  const size_t n = dedup.size();
  for (size_t i = 0; i < n; ++i) {
    const Vec2 & a = dedup[(i + n - 1) % n];
    const Vec2 & b = dedup[i];
    const Vec2 & c = dedup[(i + 1) % n];
    const double cross = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
    if (std::abs(cross) > tol * scale) {
      out.push_back(b);
    }
  }
  return out;
}

// Halfspace rows of a CCW polygon containing the origin, normalized to h = 1.
InputPolytope polygon_to_polytope(const std::vector<Vec2> & poly, double mu)
{
  const size_t n = poly.size();
  InputPolytope out;
  out.mu_used = mu;
  out.vertices = poly;
  out.H.resize(static_cast<Eigen::Index>(n), 2);
  out.h.resize(static_cast<Eigen::Index>(n));
  for (size_t i = 0; i < n; ++i) {
    const Vec2 & p = poly[i];
    const Vec2 & q = poly[(i + 1) % n];
    const Vec2 e = q - p;
    Vec2 normal(e.y(), -e.x());  // outward for CCW winding
    const double b = normal.dot(p);
    if (!(b > 0.0)) {
      throw std::logic_error("input polytope does not strictly contain the origin");
    }
    out.H.row(static_cast<Eigen::Index>(i)) = (normal / b).transpose();
    out.h[static_cast<Eigen::Index>(i)] = 1.0;
  }
  return out;
}

}  // namespace

bool InputPolytope::contains(const Vec2 & u, double eps_scale) const
{
  const double eps = eps_scale * h.lpNorm<Eigen::Infinity>();
  return ((H * u - h).array() <= eps).all();
}

InputPolytope inscribe_ellipse_polytope(double mu, double Fzf, double Fz, int n_edges)
{
  if (!(mu > 0.0) || !(Fzf > 0.0) || !(Fz > 0.0) || n_edges < 4) {
    throw std::invalid_argument("inscribe_ellipse_polytope: invalid parameters");
  }
  const double a = mu * Fzf;  // lateral half-axis
  const double b = mu * Fz;   // longitudinal half-axis
  std::vector<Vec2> verts;
  verts.reserve(static_cast<size_t>(n_edges));
  for (int i = 0; i < n_edges; ++i) {
    const double phi = 2.0 * std::numbers::pi * i / n_edges;
    verts.emplace_back(a * std::cos(phi), b * std::sin(phi));
  }
  return polygon_to_polytope(verts, mu);
}

InputPolytope build_input_constraints(
  double mu, const VehicleParams & p, const ActuatorLimits & limits, int n_edges)
{
  if (!limits.valid()) {
    throw std::invalid_argument("build_input_constraints: invalid actuator limits");
  }
  InputPolytope ellipse = inscribe_ellipse_polytope(mu, p.front_axle_load(), p.total_load(), n_edges);

  std::vector<Vec2> poly = ellipse.vertices;
  const double scale = mu * p.total_load();
  const std::vector<Halfspace> box = {
    {Vec2(1.0, 0.0), limits.Fyf_max},
    {Vec2(-1.0, 0.0), limits.Fyf_max},
    {Vec2(0.0, 1.0), limits.Fx_max},
    {Vec2(0.0, -1.0), -limits.Fx_min},
  };
  for (const Halfspace & hs : box) {
    poly = clip(poly, hs);
    if (poly.size() < 3) {
      throw std::logic_error("input constraint intersection is empty");
    }
  }
  poly = simplify(std::move(poly), scale);
  if (poly.size() < 3) {
    throw std::logic_error("input constraint intersection degenerated");
  }
  return polygon_to_polytope(poly, mu);
}

Vec2 project_radially(const InputPolytope & poly, const Vec2 & u)
{
  const double worst = ((poly.H * u).array() / poly.h.array()).maxCoeff();
  if (worst <= 1.0) {
    return u;
  }
  return u / worst;
}

double ray_scale_to_boundary(const InputPolytope & poly, const Vec2 & dir)
{
  const Eigen::VectorXd lhs = poly.H * dir;
  double t = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < lhs.size(); ++i) {
    if (lhs[i] > 0.0) {
      t = std::min(t, poly.h[i] / lhs[i]);
    }
  }
  return std::isfinite(t) ? t : 0.0;
}

}  // namespace saarti
