#pragma once

#include <Eigen/Core>

#include <optional>
#include <vector>

namespace saarti {

/// Convex QP data: minimize 0.5 z'Pz + q'z subject to l <= Az <= u.
/// Equality rows are expressed as l_i == u_i; one-sided rows use +-infinity.
struct QpProblem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd A;
  Eigen::VectorXd l;
  Eigen::VectorXd u;

  Eigen::Index num_vars() const { return P.rows(); }
  Eigen::Index num_cons() const { return A.rows(); }

  /// Throws std::invalid_argument on inconsistent dimensions, asymmetric P
  /// (beyond roundoff) or crossed bounds.
  void validate() const;
};

enum class QpStatus { kSolved, kMaxIterations, kPrimalInfeasible };

struct QpSolution {
  Eigen::VectorXd z;  ///< primal
  Eigen::VectorXd y;  ///< dual (y_i > 0 active at u, y_i < 0 active at l)
  QpStatus status = QpStatus::kMaxIterations;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  double objective = 0.0;
  bool polished = false;
};

struct QpSettings {
  double eps_abs = 1e-6;
  double eps_rel = 1e-6;
  int max_iter = 4000;

  double rho = 0.1;           ///< dual step size (boosted 1e3x on equality rows)
  double sigma = 1e-6;        ///< primal regularization
  double alpha = 1.6;         ///< over-relaxation
  bool scaling = true;
  int scaling_iters = 10;
  bool adaptive_rho = true;
  int check_interval = 25;    ///< iterations between convergence checks
  bool polish = true;
  double polish_delta = 1e-7;
  double eps_pinf = 1e-8;     ///< primal infeasibility certificate tolerance
  bool verbose = false;       ///< print residual/rho trace to stdout
};

struct QpWarmStart {
  Eigen::VectorXd z;
  Eigen::VectorXd y;
};

/// Solve the QP with an operator-splitting method (scaled ADMM with optional
/// active-set polishing). On kSolved the KKT residuals are within the
/// configured tolerances; on kMaxIterations the best iterate is returned with
/// its residuals.
QpSolution solve_qp(
  const QpProblem & prob, const QpSettings & settings = {},
  const std::optional<QpWarmStart> & warm = std::nullopt);

/// Stage layout of a horizon-structured vector: a sequence of blocks, each
/// holding n_stages stages of stage_dim entries (n_stages == 1 marks
/// stage-invariant tails such as slack variables).
struct HorizonStructure {
  struct Block {
    int stage_dim;
    int n_stages;
  };
  std::vector<Block> primal;
  std::vector<Block> dual;
};

/// Shift every block of a stage-stacked vector one stage forward, duplicating
/// the last stage (the receding-horizon warm-start pattern).
Eigen::VectorXd shift_stages(const Eigen::VectorXd & v, const std::vector<HorizonStructure::Block> & blocks);

/// Shift a previous solution's primal and dual one stage forward.
QpWarmStart warm_start_shift(const QpSolution & prev, const HorizonStructure & hs);

/// Write the problem as dense text matrices (P, q, A, l, u) for offline
/// cross-checking with external solvers.
void dump_problem(const QpProblem & prob, const std::string & path);

}  // namespace saarti
