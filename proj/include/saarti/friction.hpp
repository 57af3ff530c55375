#pragma once

#include "saarti/input_constraints.hpp"

#include <utility>
#include <vector>

namespace saarti {

/// Piecewise-constant actual friction over arc length. The first patch covers
/// everything before its start.
struct FrictionField {
  std::vector<std::pair<double, double>> patches;  ///< (s_start, mu), sorted by s_start

  static FrictionField constant(double mu) { return FrictionField{{{0.0, mu}}}; }

  double at(double s) const;
  bool valid() const;
};

struct EstimatorConfig {
  enum class Mode { kAdaptive, kStatic };
  Mode mode = Mode::kAdaptive;
  double mu_asm = 0.8;  ///< assumed value (static mode; initial value in adaptive mode)
  double delay = 0.1;   ///< convergence delay of the simulated identification [s]
};

/// Simulated friction identification: static mode returns mu_asm; adaptive
/// mode returns the field value at the vehicle position, with changes of the
/// underlying value taking effect only after the configured delay has elapsed
/// (measured from the change, or from scenario start for the initial value).
class FrictionEstimator {
public:
  FrictionEstimate step(double t, const FrictionField & field, double s, const EstimatorConfig & cfg);

private:
  bool initialized_ = false;
  double estimate_ = 0.0;
  double last_underlying_ = 0.0;
  double change_time_ = 0.0;
};

}  // namespace saarti
