#pragma once

#include "saarti/simulation.hpp"

#include <string>
#include <vector>

namespace saarti::plot {

/// Bird's-eye overlay: road edges, centerline, driven path, obstacles.
void write_trajectory_svg(
  const std::string & path, const Centerline & road, const std::vector<StepRecord> & trace,
  const std::vector<Obstacle> & obstacles, double r_veh, const std::string & title);

/// Front-tire force plane: commanded vs realized points with the actual and
/// assumed friction circles.
void write_forces_svg(
  const std::string & path, const std::vector<StepRecord> & trace, const VehicleParams & params,
  const std::string & title);

/// Side-by-side path and speed overlay of two traces.
void write_compare_svg(
  const std::string & path, const std::vector<StepRecord> & a, const std::vector<StepRecord> & b,
  const std::string & label_a, const std::string & label_b);

}  // namespace saarti::plot
