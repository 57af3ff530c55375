#include "svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace saarti::plot {

namespace {

struct Bounds {
  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -std::numeric_limits<double>::infinity();
  double ymin = std::numeric_limits<double>::infinity();
  double ymax = -std::numeric_limits<double>::infinity();

  void add(double x, double y)
  {
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  }
  void pad(double p)
  {
    xmin -= p;
    xmax += p;
    ymin -= p;
    ymax += p;
  }
};

// Maps world coordinates to a fixed-size canvas with y up.
class Canvas {
public:
  Canvas(const Bounds & b, double width_px) : b_(b)
  {
    const double aspect = (b.ymax - b.ymin) / std::max(b.xmax - b.xmin, 1e-9);
    w_ = width_px;
    h_ = std::max(120.0, width_px * aspect);
    scale_ = w_ / (b.xmax - b.xmin);
    if (h_ / (b.ymax - b.ymin) < scale_) {
      scale_ = h_ / (b.ymax - b.ymin);
    }
  }

  double px(double x) const { return (x - b_.xmin) * scale_ + 10.0; }
  double py(double y) const { return h_ - (y - b_.ymin) * scale_ + 10.0; }
  double width() const { return w_ + 20.0; }
  double height() const { return h_ + 40.0; }
  double scale() const { return scale_; }

private:
  Bounds b_;
  double w_, h_, scale_;
};

std::string polyline(
  const Canvas & c, const std::vector<std::pair<double, double>> & pts, const std::string & color,
  double width, const std::string & dash = "")
{
  std::ostringstream os;
  os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width << "\"";
  if (!dash.empty()) {
    os << " stroke-dasharray=\"" << dash << "\"";
  }
  os << " points=\"";
  for (const auto & [x, y] : pts) {
    os << c.px(x) << "," << c.py(y) << " ";
  }
  os << "\"/>\n";
  return os.str();
}

std::string circle(
  const Canvas & c, double x, double y, double r_world, const std::string & fill,
  const std::string & stroke, double op = 1.0)
{
  std::ostringstream os;
  os << "<circle cx=\"" << c.px(x) << "\" cy=\"" << c.py(y) << "\" r=\"" << r_world * c.scale()
     << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\" fill-opacity=\"" << op << "\"/>\n";
  return os.str();
}

void write_svg(const std::string & path, const Canvas & c, const std::string & body, const std::string & title)
{
  std::ofstream os(path);
  if (!os) {
    throw std::runtime_error("cannot open plot file: " + path);
  }
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << c.width() << "\" height=\""
     << c.height() << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"12\" y=\"" << c.height() - 8 << "\" font-family=\"sans-serif\" font-size=\"13\">"
     << title << "</text>\n";
  os << body << "</svg>\n";
}

}  // namespace

void write_trajectory_svg(
  const std::string & path, const Centerline & road, const std::vector<StepRecord> & trace,
  const std::vector<Obstacle> & obstacles, double r_veh, const std::string & title)
{
  double s_lo = trace.empty() ? 0.0 : trace.front().x.s;
  double s_hi = trace.empty() ? road.length() : trace.back().x.s;
  for (const Obstacle & o : obstacles) s_hi = std::max(s_hi, o.s);
  s_lo = std::max(0.0, s_lo - 10.0);
  s_hi = std::min(road.length(), s_hi + 15.0);

  std::vector<std::pair<double, double>> center, left, right, veh;
  Bounds b;
  for (double s = s_lo; s <= s_hi; s += 1.0) {
    const double w = road.width(s);
    const Pose2 pc = road.to_cartesian(s, 0.0);
    const Pose2 pl = road.to_cartesian(s, w);
    const Pose2 pr = road.to_cartesian(s, -w);
    center.emplace_back(pc.x, pc.y);
    left.emplace_back(pl.x, pl.y);
    right.emplace_back(pr.x, pr.y);
    b.add(pl.x, pl.y);
    b.add(pr.x, pr.y);
  }
  for (const StepRecord & r : trace) {
    const Pose2 p = road.to_cartesian(std::clamp(r.x.s, 0.0, road.length()), r.x.d);
    veh.emplace_back(p.x, p.y);
    b.add(p.x, p.y);
  }
  b.pad(3.0);

  Canvas c(b, 900.0);
  std::string body;
  body += polyline(c, left, "#444", 1.5);
  body += polyline(c, right, "#444", 1.5);
  body += polyline(c, center, "#bbb", 1.0, "6,6");
  body += polyline(c, veh, "#1f6fd0", 2.0);
  for (const Obstacle & o : obstacles) {
    const Pose2 p = road.to_cartesian(std::clamp(o.s, 0.0, road.length()), o.d);
    body += circle(c, p.x, p.y, o.radius, "#d03030", "#902020", 0.8);
  }
  if (!veh.empty()) {
    body += circle(c, veh.front().first, veh.front().second, r_veh, "none", "#1f6fd0");
    body += circle(c, veh.back().first, veh.back().second, r_veh, "none", "#10407a");
  }
  write_svg(path, c, body, title);
}

void write_forces_svg(
  const std::string & path, const std::vector<StepRecord> & trace, const VehicleParams & params,
  const std::string & title)
{
  const double front_share = params.front_axle_load() / params.total_load();
  double mu_act = 0.0, mu_asm = 0.0;
  for (const StepRecord & r : trace) {
    mu_act = std::max(mu_act, r.mu_act);
    if (mu_asm == 0.0) mu_asm = r.mu_est;
  }
  const double r_act = mu_act * params.front_axle_load();
  const double r_asm = mu_asm * params.front_axle_load();
  Bounds b;
  b.add(-1.2 * std::max(r_act, r_asm), -1.2 * std::max(r_act, r_asm));
  b.add(1.2 * std::max(r_act, r_asm), 1.2 * std::max(r_act, r_asm));

  Canvas c(b, 500.0);
  std::string body;
  // friction circles: actual solid, assumed dashed
  std::vector<std::pair<double, double>> act, asm_;
  for (int i = 0; i <= 128; ++i) {
    const double a = 2.0 * M_PI * i / 128;
    act.emplace_back(r_act * std::cos(a), r_act * std::sin(a));
    asm_.emplace_back(r_asm * std::cos(a), r_asm * std::sin(a));
  }
  body += polyline(c, act, "#000", 1.5);
  body += polyline(c, asm_, "#000", 1.2, "5,5");
  for (const StepRecord & r : trace) {
    const double cx = c.px(r.u_cmd.Fyf), cy = c.py(front_share * r.u_cmd.Fx);
    std::ostringstream cross;
    cross << "<path d=\"M" << cx - 3 << " " << cy - 3 << " L" << cx + 3 << " " << cy + 3 << " M"
          << cx - 3 << " " << cy + 3 << " L" << cx + 3 << " " << cy - 3
          << "\" stroke=\"#1f6fd0\" stroke-width=\"1\"/>\n";
    body += cross.str();
    body += circle(c, r.realized.Fyf, r.realized.Fxf, 60.0, "none", "#c030c0");
  }
  write_svg(path, c, body, title + " (x: Fyf, y: front Fx; blue cross commanded, magenta realized)");
}

void write_compare_svg(
  const std::string & path, const std::vector<StepRecord> & a, const std::vector<StepRecord> & b,
  const std::string & label_a, const std::string & label_b)
{
  Bounds bounds;
  std::vector<std::pair<double, double>> pa, pb, va, vb;
  for (const StepRecord & r : a) {
    pa.emplace_back(r.x.s, r.x.d);
    bounds.add(r.x.s, r.x.d);
  }
  for (const StepRecord & r : b) {
    pb.emplace_back(r.x.s, r.x.d);
    bounds.add(r.x.s, r.x.d);
  }
  bounds.pad(2.0);
  Canvas c(bounds, 900.0);
  std::string body;
  body += polyline(c, pa, "#1f6fd0", 2.0);
  body += polyline(c, pb, "#e08020", 2.0);
  write_svg(
    path, c, body,
    "path overlay in (s, d): blue " + label_a + ", orange " + label_b);
}

}  // namespace saarti::plot
