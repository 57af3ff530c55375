#pragma once

#include "saarti/scenario.hpp"

#include <cstdint>
#include <functional>
#include <string>

namespace saarti {

enum class Strategy { kSaaRti, kSaaRtiNonAdaptive, kSssMpc, kSqpOracleLeft, kSqpOracleRight };

std::string strategy_name(Strategy s);
Strategy parse_strategy(const std::string & name);

struct RealizedForces {
  double Fyf = 0.0;
  double Fxf = 0.0;
  double Fyr = 0.0;
  double Fxr = 0.0;
};

/// Advance the higher-fidelity plant by dt: the commanded front force pair is
/// radially projected onto the actual friction circle, the rear runs a
/// saturated linear tire, and the state integrates with fixed-step RK4.
std::pair<VehicleState, RealizedForces> plant_step(
  const VehicleState & x, const ControlInput & u_cmd, double mu_act, double dt,
  const VehicleParams & p, const Centerline & road);

enum class Outcome { kStoppedSafe, kPassedSafe, kCollided, kOffRoad, kTimeout };

std::string outcome_name(Outcome o);

/// One control cycle of the run trace.
struct StepRecord {
  double t = 0.0;
  VehicleState x;
  ControlInput u_cmd;
  RealizedForces realized;
  double mu_est = 0.0;
  double mu_act = 0.0;
  Vec3 slacks = Vec3::Zero();
  int qp_iters = 0;
  double cycle_time_ms = 0.0;
  double j_step = 0.0;
  bool emergency = false;
};

struct RunResult {
  double J_cl = 0.0;
  Outcome outcome = Outcome::kTimeout;
  std::vector<StepRecord> trace;

  int cycles = 0;
  double max_certificate_violation = 0.0;  ///< warm feasibility over all assembled QPs
  double max_warm_input_violation = 0.0;
  int improvement_violations = 0;          ///< cycles where the QP lost to its warm start bound
  int fallback_count = 0;
  bool emergency_used = false;
  double rms_front_discrepancy = 0.0;      ///< commanded vs realized front force [N]
  double peak_side_slip = 0.0;             ///< |atan(vy/vx)| while vx >= 1 [rad]
  double max_front_force_ratio = 0.0;      ///< realized front magnitude / (mu_act * Fzf)
  double s_obs_drawn = 0.0;                ///< obstacle position of this run (Monte Carlo)
};

/// Optional per-cycle debug sinks (candidate dumps, QP dumps).
struct RunHooks {
  std::function<void(int cycle, const std::vector<Trajectory> &)> on_candidates;
  std::function<void(int cycle, const QpProblem &)> on_qp;
};

/// Execute the receding-horizon loop of the given strategy on the scenario.
/// Timing is measured only when requested so that traces stay reproducible.
RunResult run_closed_loop(
  const Scenario & scn, Strategy strategy, bool measure_timing = false,
  const RunHooks * hooks = nullptr);

struct RunSummary {
  int run_index = 0;
  double s_obs = 0.0;
  Outcome outcome = Outcome::kTimeout;
  double J_cl = 0.0;
};

struct BatchResult {
  Strategy strategy = Strategy::kSaaRti;
  std::string condition;
  int n = 0;
  int n_safe = 0;
  double J_mean = 0.0;     ///< over non-accident runs
  double J_ci_half = 0.0;
  double P_acc = 0.0;
  double P_ci_half = 0.0;
  std::vector<RunSummary> runs;
};

/// Monte Carlo batch: the obstacle position is drawn per run from the
/// configured range (identically across strategies for a given seed and run
/// index), initial conditions rotate through the configured protocol list.
BatchResult run_monte_carlo(
  const Scenario & base, int n_runs, std::uint64_t seed, Strategy strategy, int jobs = 1);

/// Scenario of Monte Carlo run i (obstacle drawn, initial condition applied).
Scenario materialize_run(const Scenario & base, int run_index, std::uint64_t seed);

bool is_accident(Outcome o);

}  // namespace saarti
