#include "saarti/scenario.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace saarti {

using nlohmann::json;

Centerline RoadSpec::build() const
{
  switch (type) {
    case Type::kStraight:
      return Centerline::straight(length, half_width);
    case Type::kCurve:
      return Centerline::constant_curve(length, radius, half_width);
    case Type::kBreakpoints:
      return Centerline::from_breakpoints(breakpoints);
  }
  throw ConfigError("unknown road type");
}

ControllerConfig::ControllerConfig()
{
  weights.Q = Vec6(0.0, 0.5, 1.0, 0.05, 0.3, 0.2).asDiagonal();
  weights.Qf = 2.0 * weights.Q;
  weights.R = Vec2(1e-8, 1e-8).asDiagonal();
  tracking_weights.Q = Vec6(0.2, 2.0, 1.0, 0.1, 2.0, 0.5).asDiagonal();
  tracking_weights.Qf = 2.0 * tracking_weights.Q;
  tracking_weights.R = weights.R;
  qp.eps_abs = 1e-4;
  qp.eps_rel = 1e-4;
  qp.max_iter = 1500;
  qp.rho = 1e-4;
}

VehicleState ControllerConfig::reference_state() const
{
  VehicleState ref;
  if (!raw_state_cost) {
    ref.vx = (target == Target::kStop) ? 0.0 : target_speed;
  }
  return ref;
}

namespace {

Vec6 diag6(const json & j, const char * key, const Vec6 & fallback)
{
  if (!j.contains(key)) return fallback;
  const auto arr = j.at(key).get<std::vector<double>>();
  if (arr.size() != 6) throw ConfigError(std::string(key) + " must have 6 entries");
  return Vec6(arr[0], arr[1], arr[2], arr[3], arr[4], arr[5]);
}

Vec2 diag2(const json & j, const char * key, const Vec2 & fallback)
{
  if (!j.contains(key)) return fallback;
  const auto arr = j.at(key).get<std::vector<double>>();
  if (arr.size() != 2) throw ConfigError(std::string(key) + " must have 2 entries");
  return Vec2(arr[0], arr[1]);
}

VehicleState parse_state(const json & j, const VehicleState & fallback)
{
  VehicleState x = fallback;
  x.s = j.value("s", x.s);
  x.d = j.value("d", x.d);
  x.dpsi = j.value("dpsi", x.dpsi);
  x.psidot = j.value("psidot", x.psidot);
  x.vx = j.value("vx", x.vx);
  x.vy = j.value("vy", x.vy);
  return x;
}

RoadSpec parse_road(const json & j)
{
  RoadSpec r;
  const std::string type = j.value("type", std::string("straight"));
  if (type == "straight") {
    r.type = RoadSpec::Type::kStraight;
  } else if (type == "curve") {
    r.type = RoadSpec::Type::kCurve;
  } else if (type == "breakpoints") {
    r.type = RoadSpec::Type::kBreakpoints;
  } else {
    throw ConfigError("road.type must be straight, curve or breakpoints");
  }
  r.length = j.value("length", r.length);
  r.half_width = j.value("half_width", r.half_width);
  r.radius = j.value("radius", r.radius);
  if (j.contains("breakpoints")) {
    for (const auto & row : j.at("breakpoints")) {
      const auto v = row.get<std::vector<double>>();
      if (v.size() != 3) throw ConfigError("road.breakpoints rows must be [s, kappa, half_width]");
      r.breakpoints.push_back({v[0], v[1], v[2]});
    }
  }
  return r;
}

Obstacle parse_obstacle(const json & j)
{
  Obstacle o;
  o.s = j.value("s", 0.0);
  o.d = j.value("d", 0.0);
  o.radius = j.value("radius", 0.5);
  o.appear_time = j.value("appear_time", 0.0);
  return o;
}

}  // namespace

Scenario parse_scenario(const std::string & json_text)
{
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception & e) {
    throw ConfigError(std::string("scenario parse error: ") + e.what());
  }

  try {
    Scenario scn;
    scn.name = j.value("name", scn.name);
    if (j.contains("road")) scn.road = parse_road(j.at("road"));
    if (j.contains("initial")) scn.initial = parse_state(j.at("initial"), scn.initial);
    if (j.contains("obstacles")) {
      for (const auto & jo : j.at("obstacles")) scn.obstacles.push_back(parse_obstacle(jo));
    }
    if (j.contains("obstacle_range")) {
      const auto & jr = j.at("obstacle_range");
      ObstacleRange r;
      r.s_min = jr.at("s_min").get<double>();
      r.s_max = jr.at("s_max").get<double>();
      r.d = jr.value("d", 0.0);
      r.radius = jr.value("radius", 0.5);
      r.appear_time = jr.value("appear_time", 0.0);
      scn.obstacle_range = r;
    }
    if (j.contains("mc_initial_conditions")) {
      for (const auto & jc : j.at("mc_initial_conditions")) {
        McInitialCondition c;
        c.road = jc.contains("road") ? parse_road(jc.at("road")) : scn.road;
        c.initial = parse_state(jc.value("initial", json::object()), scn.initial);
        scn.mc_initial_conditions.push_back(std::move(c));
      }
    }
    if (j.contains("friction")) {
      const auto & jf = j.at("friction");
      if (jf.contains("patches")) {
        scn.friction.patches.clear();
        for (const auto & row : jf.at("patches")) {
          const auto v = row.get<std::vector<double>>();
          if (v.size() != 2) throw ConfigError("friction.patches rows must be [s_start, mu]");
          scn.friction.patches.emplace_back(v[0], v[1]);
        }
      } else {
        scn.friction = FrictionField::constant(jf.value("mu", 0.95));
      }
    }
    if (j.contains("estimator")) {
      const auto & je = j.at("estimator");
      const std::string mode = je.value("mode", std::string("adaptive"));
      if (mode == "adaptive") {
        scn.estimator.mode = EstimatorConfig::Mode::kAdaptive;
      } else if (mode == "static") {
        scn.estimator.mode = EstimatorConfig::Mode::kStatic;
      } else {
        throw ConfigError("estimator.mode must be adaptive or static");
      }
      scn.estimator.mu_asm = je.value("mu_asm", scn.estimator.mu_asm);
      scn.estimator.delay = je.value("delay", scn.estimator.delay);
    }
    if (j.contains("vehicle")) {
      const auto & jv = j.at("vehicle");
      scn.vehicle.m = jv.value("m", scn.vehicle.m);
      scn.vehicle.Iz = jv.value("Iz", scn.vehicle.Iz);
      scn.vehicle.lf = jv.value("lf", scn.vehicle.lf);
      scn.vehicle.lr = jv.value("lr", scn.vehicle.lr);
      scn.vehicle.Caf = jv.value("Caf", scn.vehicle.Caf);
      scn.vehicle.Car = jv.value("Car", scn.vehicle.Car);
      scn.vehicle.g = jv.value("g", scn.vehicle.g);
    }
    if (j.contains("controller")) {
      const auto & jc = j.at("controller");
      ControllerConfig & c = scn.controller;
      c.N = jc.value("N", c.N);
      c.Ts = jc.value("Ts", c.Ts);
      c.weights.Q = diag6(jc, "Q", c.weights.Q.diagonal()).asDiagonal();
      c.weights.Qf = diag6(jc, "Qf", c.weights.Qf.diagonal()).asDiagonal();
      c.weights.R = diag2(jc, "R", c.weights.R.diagonal()).asDiagonal();
      if (jc.contains("beta")) {
        if (jc.at("beta").is_array()) {
          const auto arr = jc.at("beta").get<std::vector<double>>();
          if (arr.size() != 3) throw ConfigError("controller.beta must be scalar or 3 entries");
          c.slack.beta = Vec3(arr[0], arr[1], arr[2]).asDiagonal();
        } else {
          c.slack.beta = jc.at("beta").get<double>() * Mat3::Identity();
        }
      }
      c.tracking_weights.Q = diag6(jc, "tracking_Q", c.tracking_weights.Q.diagonal()).asDiagonal();
      c.tracking_weights.Qf = diag6(jc, "tracking_Qf", c.tracking_weights.Qf.diagonal()).asDiagonal();
      c.tracking_weights.R = diag2(jc, "tracking_R", c.tracking_weights.R.diagonal()).asDiagonal();
      c.track_halfwidth = jc.value("track_halfwidth", c.track_halfwidth);
      c.track_ds = jc.value("track_ds", c.track_ds);
      c.track_dv = jc.value("track_dv", c.track_dv);
      c.n_lateral = jc.value("n_lateral", c.n_lateral);
      c.n_segments = jc.value("n_segments", c.n_segments);
      c.n_edges = jc.value("n_edges", c.n_edges);
      if (jc.contains("actuator")) {
        const auto & ja = jc.at("actuator");
        c.actuator.Fyf_max = ja.value("Fyf_max", c.actuator.Fyf_max);
        c.actuator.Fx_min = ja.value("Fx_min", c.actuator.Fx_min);
        c.actuator.Fx_max = ja.value("Fx_max", c.actuator.Fx_max);
      }
      if (jc.contains("corridor")) {
        const auto & jr = jc.at("corridor");
        c.corridor.margin = jr.value("margin", c.corridor.margin);
        c.corridor.ds_back = jr.value("ds_back", c.corridor.ds_back);
        c.corridor.ds_fwd = jr.value("ds_fwd", c.corridor.ds_fwd);
      }
      c.r_veh = jc.value("r_veh", c.r_veh);
      const std::string target = jc.value("target", std::string("stop"));
      if (target == "stop") {
        c.target = ControllerConfig::Target::kStop;
      } else if (target == "speed") {
        c.target = ControllerConfig::Target::kSpeed;
      } else {
        throw ConfigError("controller.target must be stop or speed");
      }
      c.target_speed = jc.value("target_speed", c.target_speed);
      c.raw_state_cost = jc.value("raw_state_cost", c.raw_state_cost);
      if (jc.contains("qp")) {
        const auto & jq = jc.at("qp");
        c.qp.eps_abs = jq.value("eps_abs", c.qp.eps_abs);
        c.qp.eps_rel = jq.value("eps_rel", c.qp.eps_rel);
        c.qp.max_iter = jq.value("max_iter", c.qp.max_iter);
        c.qp.rho = jq.value("rho", c.qp.rho);
      }
    }
    scn.duration = j.value("duration", scn.duration);
    scn.plant_substeps = j.value("plant_substeps", scn.plant_substeps);
    scn.v_max = j.value("v_max", scn.v_max);
    scn.seed = j.value("seed", scn.seed);
    scn.validate();
    return scn;
  } catch (const json::exception & e) {
    throw ConfigError(std::string("scenario field error: ") + e.what());
  }
}

Scenario load_scenario(const std::string & path)
{
  std::ifstream is(path);
  if (!is) {
    throw ConfigError("cannot open scenario file: " + path);
  }
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse_scenario(text);
}

void Scenario::validate() const
{
  if (!vehicle.valid()) throw ConfigError("vehicle parameters must be strictly positive");
  if (!friction.valid()) throw ConfigError("friction field invalid: need 0 < mu <= 1.5, increasing patches");
  if (!(estimator.mu_asm > 0.0 && estimator.mu_asm <= 1.5)) throw ConfigError("estimator.mu_asm out of range");
  if (estimator.delay < 0.0) throw ConfigError("estimator.delay must be nonnegative");
  if (controller.N < 2) throw ConfigError("controller.N must be at least 2");
  if (!(controller.Ts > 0.0)) throw ConfigError("controller.Ts must be positive");
  if (controller.n_lateral < 1 || controller.n_segments < 1 || controller.n_edges < 4) {
    throw ConfigError("controller grid/profile/polytope sizes invalid");
  }
  if (!controller.actuator.valid()) throw ConfigError("actuator limits invalid");
  if (!(duration > 0.0) || plant_substeps < 1) throw ConfigError("duration/plant_substeps invalid");
  if (!initial.all_finite() || initial.vx < 0.0) throw ConfigError("initial state invalid");

  const Centerline road = this->road.build();
  if (std::abs(initial.d) + controller.r_veh > road.width(initial.s)) {
    throw ConfigError("initial state outside the drivable lane");
  }
  for (const Obstacle & o : obstacles) {
    if (std::abs(o.d) > road.width(o.s)) throw ConfigError("obstacle outside the road");
    if (!(o.radius > 0.0)) throw ConfigError("obstacle radius must be positive");
  }
  if (obstacle_range && !(obstacle_range->s_min <= obstacle_range->s_max)) {
    throw ConfigError("obstacle_range s_min must not exceed s_max");
  }

  // The slack penalty must dominate the tuning weights.
  const double beta_min = controller.slack.beta.diagonal().minCoeff();
  const double w_max = std::max(
    {controller.weights.Q.diagonal().maxCoeff(), controller.weights.Qf.diagonal().maxCoeff(),
     controller.weights.R.diagonal().maxCoeff()});
  if (!(beta_min > 0.0) || beta_min < 1e3 * w_max) {
    throw ConfigError("slack penalty beta must exceed the tuning weights by at least 1e3");
  }
}

}  // namespace saarti
