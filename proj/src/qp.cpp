#include "saarti/qp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace saarti {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Eigen::VectorXd & v)
{
  return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>();
}

struct ScaledData {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd A;
  Eigen::VectorXd l, u;
  Eigen::VectorXd D;  // variable scaling
  Eigen::VectorXd E;  // constraint scaling
  double c = 1.0;     // cost scaling
};

// Modified Ruiz equilibration of the KKT block matrix plus cost scaling.
ScaledData scale_problem(const QpProblem & prob, const QpSettings & st)
{
  const Eigen::Index n = prob.num_vars();
  const Eigen::Index m = prob.num_cons();
  ScaledData sd;
  sd.P = prob.P;
  sd.q = prob.q;
  sd.A = prob.A;
  sd.l = prob.l;
  sd.u = prob.u;
  sd.D = Eigen::VectorXd::Ones(n);
  sd.E = Eigen::VectorXd::Ones(m);
  if (!st.scaling) {
    return sd;
  }

  auto safe_delta = [](double norm) {
    if (norm <= 0.0 || !std::isfinite(norm)) return 1.0;
    return 1.0 / std::sqrt(norm);
  };

  for (int it = 0; it < st.scaling_iters; ++it) {
    Eigen::VectorXd dx(n), dy(m);
    for (Eigen::Index j = 0; j < n; ++j) {
      double norm = sd.P.col(j).lpNorm<Eigen::Infinity>();
      if (m > 0) norm = std::max(norm, sd.A.col(j).lpNorm<Eigen::Infinity>());
      dx[j] = std::clamp(safe_delta(norm), 1e-4, 1e4);
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      const double norm = sd.A.row(i).lpNorm<Eigen::Infinity>();
      dy[i] = std::clamp(safe_delta(norm), 1e-4, 1e4);
    }
    sd.P = dx.asDiagonal() * sd.P * dx.asDiagonal();
    sd.q = dx.asDiagonal() * sd.q;
    if (m > 0) {
      sd.A = dy.asDiagonal() * sd.A * dx.asDiagonal();
    }
    sd.D = sd.D.cwiseProduct(dx);
    sd.E = sd.E.cwiseProduct(dy);

    // Cost scaling toward unit magnitude.
    double mean_col = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      mean_col += sd.P.col(j).lpNorm<Eigen::Infinity>();
    }
    mean_col /= static_cast<double>(n);
    double gamma = 1.0 / std::max({mean_col, inf_norm(sd.q), 1e-12});
    gamma = std::clamp(gamma, 1e-4, 1e4);
    sd.P *= gamma;
    sd.q *= gamma;
    sd.c *= gamma;
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (std::isfinite(sd.l[i])) sd.l[i] = prob.l[i] * sd.E[i];
    if (std::isfinite(sd.u[i])) sd.u[i] = prob.u[i] * sd.E[i];
  }
  return sd;
}

struct Residuals {
  double prim = 0.0;
  double dual = 0.0;
  double eps_prim = 0.0;
  double eps_dual = 0.0;
  double prim_rel = 0.0;  ///< scaled residual over scaled magnitudes (rho policy)
  double dual_rel = 0.0;
  bool converged(void) const { return prim <= eps_prim && dual <= eps_dual; }
};

Residuals compute_residuals(
  const ScaledData & sd, const QpSettings & st, const Eigen::VectorXd & x,
  const Eigen::VectorXd & z, const Eigen::VectorXd & y)
{
  Residuals r;
  const Eigen::VectorXd Einv = sd.E.cwiseInverse();
  const Eigen::VectorXd Dinv = sd.D.cwiseInverse();
  const Eigen::VectorXd Ax = sd.A * x;
  const Eigen::VectorXd Px = sd.P * x;
  const Eigen::VectorXd Aty = sd.A.transpose() * y;

  r.prim = inf_norm(Einv.cwiseProduct(Ax - z));
  r.dual = inf_norm(Dinv.cwiseProduct(Px + sd.q + Aty)) / sd.c;
  r.eps_prim = st.eps_abs + st.eps_rel * std::max(
    inf_norm(Einv.cwiseProduct(Ax)), inf_norm(Einv.cwiseProduct(z)));
  r.eps_dual = st.eps_abs + st.eps_rel / sd.c * std::max({
    inf_norm(Dinv.cwiseProduct(Px)), inf_norm(Dinv.cwiseProduct(Aty)),
    inf_norm(Dinv.cwiseProduct(sd.q))});

  const double prim_scale = std::max({inf_norm(Ax), inf_norm(z), 1e-12});
  const double dual_scale = std::max({inf_norm(Px), inf_norm(Aty), inf_norm(sd.q), 1e-12});
  r.prim_rel = inf_norm(Ax - z) / prim_scale;
  r.dual_rel = inf_norm(Px + sd.q + Aty) / dual_scale;
  return r;
}

// Active-set polish: solve the regularized KKT system of the rows the duals
// mark active, with iterative refinement against the unregularized system.
bool polish(
  const QpProblem & prob, const QpSettings & st, Eigen::VectorXd & z, Eigen::VectorXd & y,
  double & rp, double & rd)
{
  const Eigen::Index n = prob.num_vars();
  const Eigen::Index m = prob.num_cons();
  std::vector<Eigen::Index> lower, upper;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (y[i] < 0.0 && std::isfinite(prob.l[i])) lower.push_back(i);
    else if (y[i] > 0.0 && std::isfinite(prob.u[i])) upper.push_back(i);
  }
  const Eigen::Index na = static_cast<Eigen::Index>(lower.size() + upper.size());
  const Eigen::Index dim = n + na;

  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd K_reg;
  Eigen::VectorXd rhs(dim);
  K.topLeftCorner(n, n) = prob.P;
  rhs.head(n) = -prob.q;
  Eigen::Index row = n;
  for (Eigen::Index i : lower) {
    K.block(row, 0, 1, n) = prob.A.row(i);
    K.block(0, row, n, 1) = prob.A.row(i).transpose();
    rhs[row] = prob.l[i];
    ++row;
  }
  for (Eigen::Index i : upper) {
    K.block(row, 0, 1, n) = prob.A.row(i);
    K.block(0, row, n, 1) = prob.A.row(i).transpose();
    rhs[row] = prob.u[i];
    ++row;
  }
  K_reg = K;
  K_reg.topLeftCorner(n, n).diagonal().array() += st.polish_delta;
  K_reg.bottomRightCorner(na, na).diagonal().array() -= st.polish_delta;

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(K_reg);
  Eigen::VectorXd sol = lu.solve(rhs);
  for (int ref = 0; ref < 3; ++ref) {
    sol += lu.solve(rhs - K * sol);
  }
  if (!sol.allFinite()) {
    return false;
  }

  Eigen::VectorXd z_new = sol.head(n);
  Eigen::VectorXd y_new = Eigen::VectorXd::Zero(m);
  row = n;
  for (Eigen::Index i : lower) y_new[i] = sol[row++];
  for (Eigen::Index i : upper) y_new[i] = sol[row++];

  // Unscaled residuals of the polished candidate.
  const Eigen::VectorXd Az = prob.A * z_new;
  double rp_new = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    rp_new = std::max(rp_new, std::max(prob.l[i] - Az[i], Az[i] - prob.u[i]));
  }
  rp_new = std::max(rp_new, 0.0);
  const double rd_new = inf_norm(prob.P * z_new + prob.q + prob.A.transpose() * y_new);

  if (std::max(rp_new, rd_new) < std::max(rp, rd)) {
    z = z_new;
    y = y_new;
    rp = rp_new;
    rd = rd_new;
    return true;
  }
  return false;
}

}  // namespace

void QpProblem::validate() const
{
  const Eigen::Index n = num_vars();
  const Eigen::Index m = num_cons();
  if (P.rows() != n || P.cols() != n || q.size() != n) {
    throw std::invalid_argument("qp: inconsistent objective dimensions");
  }
  if (A.cols() != n && m > 0) {
    throw std::invalid_argument("qp: constraint matrix column mismatch");
  }
  if (l.size() != m || u.size() != m) {
    throw std::invalid_argument("qp: bound dimension mismatch");
  }
  const double asym = (P - P.transpose()).lpNorm<Eigen::Infinity>();
  if (asym > 1e-8 * std::max(1.0, P.lpNorm<Eigen::Infinity>())) {
    throw std::invalid_argument("qp: P is not symmetric");
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (l[i] > u[i]) {
      throw std::invalid_argument("qp: crossed bounds l > u");
    }
  }
}

QpSolution solve_qp(
  const QpProblem & prob, const QpSettings & st, const std::optional<QpWarmStart> & warm)
{
  const Eigen::Index n = prob.num_vars();
  const Eigen::Index m = prob.num_cons();

  QpSolution sol;
  sol.z = Eigen::VectorXd::Zero(n);
  sol.y = Eigen::VectorXd::Zero(m);

  // Unconstrained fast path.
  if (m == 0) {
    Eigen::MatrixXd Preg = prob.P;
    Preg.diagonal().array() += 1e-12 * std::max(1.0, prob.P.lpNorm<Eigen::Infinity>());
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Preg);
    Eigen::VectorXd z = ldlt.solve(-prob.q);
    for (int ref = 0; ref < 2; ++ref) {
      z += ldlt.solve(-prob.q - prob.P * z);
    }
    sol.z = z;
    sol.dual_residual = inf_norm(prob.P * z + prob.q);
    sol.status = sol.dual_residual <= st.eps_abs + st.eps_rel * std::max(1.0, inf_norm(prob.q))
                   ? QpStatus::kSolved
                   : QpStatus::kMaxIterations;
    sol.objective = 0.5 * z.dot(prob.P * z) + prob.q.dot(z);
    return sol;
  }

  const ScaledData sd = scale_problem(prob, st);

  // Per-row dual step: boosted on equality rows.
  auto make_rho = [&](double base) {
    Eigen::VectorXd r(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      r[i] = (prob.l[i] == prob.u[i]) ? 1e3 * base : base;
    }
    return r;
  };
  double rho_bar = st.rho;
  Eigen::VectorXd rho = make_rho(rho_bar);

  auto factorize = [&](const Eigen::VectorXd & rho_vec) {
    Eigen::MatrixXd M = sd.P;
    M.diagonal().array() += st.sigma;
    M.noalias() += sd.A.transpose() * rho_vec.asDiagonal() * sd.A;
    return Eigen::LLT<Eigen::MatrixXd>(M);
  };
  Eigen::LLT<Eigen::MatrixXd> llt = factorize(rho);

  // Iterates (scaled space).
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
  if (warm) {
    if (warm->z.size() != n || warm->y.size() != m) {
      throw std::invalid_argument("qp: warm start dimension mismatch");
    }
    x = sd.D.cwiseInverse().cwiseProduct(warm->z);
    y = sd.c * sd.E.cwiseInverse().cwiseProduct(warm->y);
    z = (sd.A * x).cwiseMax(sd.l).cwiseMin(sd.u);
  } else {
    z = Eigen::VectorXd::Zero(m).cwiseMax(sd.l).cwiseMin(sd.u);
  }

  Residuals res;
  int iter = 0;
  int last_rho_update = 0;
  bool primal_infeasible = false;
  Eigen::VectorXd dy_acc = Eigen::VectorXd::Zero(m);

  while (iter < st.max_iter) {
    ++iter;
    const Eigen::VectorXd rhs =
      st.sigma * x - sd.q + sd.A.transpose() * (rho.cwiseProduct(z) - y);
    const Eigen::VectorXd x_tilde = llt.solve(rhs);
    const Eigen::VectorXd z_tilde = sd.A * x_tilde;

    x = st.alpha * x_tilde + (1.0 - st.alpha) * x;
    const Eigen::VectorXd z_pre =
      st.alpha * z_tilde + (1.0 - st.alpha) * z + rho.cwiseInverse().cwiseProduct(y);
    const Eigen::VectorXd z_new = z_pre.cwiseMax(sd.l).cwiseMin(sd.u);
    const Eigen::VectorXd y_new = rho.cwiseProduct(z_pre - z_new);
    dy_acc += y_new - y;
    y = y_new;
    z = z_new;

    if (iter % st.check_interval == 0 || iter == st.max_iter) {
      res = compute_residuals(sd, st, x, z, y);
      if (st.verbose) {
        std::printf(
          "qp iter %5d  rp %9.3e (eps %9.3e)  rd %9.3e (eps %9.3e)  rho %9.3e\n", iter, res.prim,
          res.eps_prim, res.dual, res.eps_dual, rho_bar);
      }
      if (res.converged()) {
        break;
      }

      // Primal infeasibility certificate from the accumulated dual direction.
      const Eigen::VectorXd dyu = sd.E.cwiseProduct(dy_acc) / sd.c;
      const double dy_norm = inf_norm(dyu);
      if (dy_norm > st.eps_pinf) {
        const double at_dy = inf_norm(prob.A.transpose() * dyu);
        double support = 0.0;
        bool valid = true;
        for (Eigen::Index i = 0; i < m; ++i) {
          const double pos = std::max(dyu[i], 0.0);
          const double neg = std::min(dyu[i], 0.0);
          if (pos > 0.0) {
            if (!std::isfinite(prob.u[i])) { valid = std::abs(pos) <= st.eps_pinf * dy_norm; if (!valid) break; }
            else support += prob.u[i] * pos;
          }
          if (neg < 0.0) {
            if (!std::isfinite(prob.l[i])) { valid = std::abs(neg) <= st.eps_pinf * dy_norm; if (!valid) break; }
            else support += prob.l[i] * neg;
          }
        }
        if (valid && at_dy <= st.eps_pinf * dy_norm && support < -st.eps_pinf * dy_norm) {
          primal_infeasible = true;
          break;
        }
      }
      dy_acc.setZero();

      if (st.adaptive_rho && iter - last_rho_update >= 100 && res.prim_rel > 0.0 &&
          res.dual_rel > 0.0) {
        const double ratio = std::sqrt(res.prim_rel / res.dual_rel);
        if (ratio > 5.0 || ratio < 0.2) {
          rho_bar = std::clamp(rho_bar * ratio, 1e-6, 1e6);
          rho = make_rho(rho_bar);
          llt = factorize(rho);
          last_rho_update = iter;
        }
      }
    }
  }

  // Unscale.
  sol.z = sd.D.cwiseProduct(x);
  sol.y = sd.E.cwiseProduct(y) / sd.c;
  sol.iterations = iter;

  if (primal_infeasible) {
    sol.status = QpStatus::kPrimalInfeasible;
    sol.primal_residual = res.prim;
    sol.dual_residual = res.dual;
    return sol;
  }

  res = compute_residuals(sd, st, x, z, y);
  sol.primal_residual = res.prim;
  sol.dual_residual = res.dual;
  sol.status = res.converged() ? QpStatus::kSolved : QpStatus::kMaxIterations;

  if (st.polish && sol.status == QpStatus::kSolved) {
    double rp = sol.primal_residual;
    double rd = sol.dual_residual;
    sol.polished = polish(prob, st, sol.z, sol.y, rp, rd);
    if (sol.polished) {
      sol.primal_residual = rp;
      sol.dual_residual = rd;
    }
  }
  sol.objective = 0.5 * sol.z.dot(prob.P * sol.z) + prob.q.dot(sol.z);
  return sol;
}

Eigen::VectorXd shift_stages(
  const Eigen::VectorXd & v, const std::vector<HorizonStructure::Block> & blocks)
{
  Eigen::VectorXd out(v.size());
  Eigen::Index offset = 0;
  for (const auto & b : blocks) {
    const Eigen::Index len = static_cast<Eigen::Index>(b.stage_dim) * b.n_stages;
    if (offset + len > v.size()) {
      throw std::invalid_argument("shift_stages: layout exceeds vector size");
    }
    for (int k = 0; k < b.n_stages; ++k) {
      const int src = std::min(k + 1, b.n_stages - 1);
      out.segment(offset + k * b.stage_dim, b.stage_dim) =
        v.segment(offset + src * b.stage_dim, b.stage_dim);
    }
    offset += len;
  }
  if (offset != v.size()) {
    throw std::invalid_argument("shift_stages: layout does not cover vector");
  }
  return out;
}

QpWarmStart warm_start_shift(const QpSolution & prev, const HorizonStructure & hs)
{
  return QpWarmStart{shift_stages(prev.z, hs.primal), shift_stages(prev.y, hs.dual)};
}

void dump_problem(const QpProblem & prob, const std::string & path)
{
  std::ofstream os(path);
  if (!os) {
    throw std::runtime_error("cannot open qp dump file: " + path);
  }
  const Eigen::IOFormat fmt(Eigen::FullPrecision, Eigen::DontAlignCols, " ", "\n");
  os << "n " << prob.num_vars() << "\nm " << prob.num_cons() << "\n";
  os << "P\n" << prob.P.format(fmt) << "\nq\n" << prob.q.transpose().format(fmt) << "\n";
  os << "A\n" << prob.A.format(fmt) << "\nl\n" << prob.l.transpose().format(fmt) << "\n";
  os << "u\n" << prob.u.transpose().format(fmt) << "\n";
}

}  // namespace saarti
