#pragma once

#include "saarti/friction.hpp"
#include "saarti/frenet.hpp"
#include "saarti/qp.hpp"
#include "saarti/sampling_planner.hpp"
#include "saarti/trajectory_optimizer.hpp"

#include <optional>
#include <string>
#include <vector>

namespace saarti {

/// Raised on malformed or inconsistent scenario configuration.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string & what) : std::runtime_error(what) {}
};

struct RoadSpec {
  enum class Type { kStraight, kCurve, kBreakpoints };
  Type type = Type::kStraight;
  double length = 400.0;
  double half_width = 3.5;
  double radius = 100.0;  ///< for kCurve; positive curves left
  std::vector<Centerline::Breakpoint> breakpoints;

  Centerline build() const;
};

struct ObstacleRange {
  double s_min = 0.0;
  double s_max = 0.0;
  double d = 0.0;
  double radius = 0.5;
  double appear_time = 0.0;
};

/// Controller tuning and structure (all overridable from the scenario file).
struct ControllerConfig {
  int N = 40;
  double Ts = 0.05;
  CostWeights weights;
  SlackWeights slack;
  CostWeights tracking_weights;  ///< plan-and-track baseline
  double track_halfwidth = 0.5;
  double track_ds = 2.0;
  double track_dv = 3.0;
  int n_lateral = 9;
  int n_segments = 40;
  int n_edges = 16;
  ActuatorLimits actuator;
  CorridorParams corridor;
  double r_veh = 1.0;
  enum class Target { kStop, kSpeed };
  Target target = Target::kStop;
  double target_speed = 0.0;
  bool raw_state_cost = false;
  QpSettings qp;

  ControllerConfig();

  /// Reference state of the regulation cost (zero in raw-state mode).
  VehicleState reference_state() const;
};

/// One initial condition of a Monte Carlo protocol.
struct McInitialCondition {
  RoadSpec road;
  VehicleState initial;
};

struct Scenario {
  std::string name = "scenario";
  RoadSpec road;
  VehicleState initial{0.0, 0.0, 0.0, 0.0, 15.0, 0.0};
  std::vector<Obstacle> obstacles;
  std::optional<ObstacleRange> obstacle_range;  ///< random draw per Monte Carlo run
  std::vector<McInitialCondition> mc_initial_conditions;
  FrictionField friction = FrictionField::constant(0.95);
  EstimatorConfig estimator;
  VehicleParams vehicle;
  ControllerConfig controller;
  double duration = 8.0;
  int plant_substeps = 10;
  double v_max = 40.0;
  std::uint64_t seed = 1;

  /// Throws ConfigError on violated invariants.
  void validate() const;
};

Scenario load_scenario(const std::string & path);
Scenario parse_scenario(const std::string & json_text);

}  // namespace saarti
