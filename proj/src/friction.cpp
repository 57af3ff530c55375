#include "saarti/friction.hpp"

#include <algorithm>

namespace saarti {

double FrictionField::at(double s) const
{
  if (patches.empty()) {
    throw std::logic_error("friction field has no patches");
  }
  double mu = patches.front().second;
  for (const auto & [start, value] : patches) {
    if (s >= start) {
      mu = value;
    } else {
      break;
    }
  }
  return mu;
}

bool FrictionField::valid() const
{
  if (patches.empty()) return false;
  for (size_t i = 0; i < patches.size(); ++i) {
    if (!(patches[i].second > 0.0 && patches[i].second <= 1.5)) return false;
    if (i > 0 && !(patches[i].first > patches[i - 1].first)) return false;
  }
  return true;
}

FrictionEstimate FrictionEstimator::step(
  double t, const FrictionField & field, double s, const EstimatorConfig & cfg)
{
  if (cfg.mode == EstimatorConfig::Mode::kStatic) {
    return FrictionEstimate{cfg.mu_asm, t};
  }
  const double underlying = field.at(s);
  if (!initialized_) {
    initialized_ = true;
    estimate_ = cfg.mu_asm;
    last_underlying_ = underlying;
    change_time_ = 0.0;
  }
  if (underlying != last_underlying_) {
    last_underlying_ = underlying;
    change_time_ = t;
  }
  if (t - change_time_ >= cfg.delay) {
    estimate_ = underlying;
  }
  return FrictionEstimate{estimate_, t};
}

}  // namespace saarti
