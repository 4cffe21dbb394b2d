#include "lpvdpc/qpcore.hpp"

#include "lpvdpc/errors.hpp"

#include <cmath>
#include <limits>
#include <optional>

namespace lpvdpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

// Problem restricted to the affine feasible set of the equalities, x = x0 + Z z.
struct Reduced {
  Vector x0;
  Matrix Z;
  Matrix P;
  Vector q;
  Matrix A;
  Vector l;
  Vector u;
};

// Factorization of Aeq' reused for the equality multipliers.
struct EqualityFactor {
  bool present = false;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod_t;  // of Aeq'
};

Vector equality_multipliers(const QpProblem& prob, const EqualityFactor& ef, const Vector& x,
                            const Vector& lambda) {
  if (!ef.present) return Vector::Zero(prob.Aeq.rows());
  Vector s = prob.P * x + prob.q;
  if (prob.Ain.rows() > 0) s += prob.Ain.transpose() * lambda;
  return ef.cod_t.solve(-s);
}

}  // namespace

QpProblem QpProblem::unconstrained(Matrix P, Vector q, double c0) {
  QpProblem prob;
  const Index n = q.size();
  prob.P = std::move(P);
  prob.q = std::move(q);
  prob.c0 = c0;
  prob.Aeq.resize(0, n);
  prob.beq.resize(0);
  prob.Ain.resize(0, n);
  prob.lb.resize(0);
  prob.ub.resize(0);
  return prob;
}

void QpProblem::validate() const {
  const Index nx = n();
  if (P.rows() != nx || P.cols() != nx) throw DimensionError("QP: P must be n x n");
  if (Aeq.cols() != nx || Aeq.rows() != beq.size()) throw DimensionError("QP: Aeq/beq shape");
  if (Ain.cols() != nx || Ain.rows() != lb.size() || lb.size() != ub.size()) {
    throw DimensionError("QP: Ain/lb/ub shape");
  }
  const double scale = std::max(1.0, P.size() > 0 ? P.cwiseAbs().maxCoeff() : 0.0);
  if (nx > 0 && (P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw DimensionError("QP: P is not symmetric");
  }
  for (Index i = 0; i < lb.size(); ++i) {
    if (lb(i) > ub(i)) throw DimensionError("QP: lb > ub in row " + std::to_string(i));
  }
  if (!P.allFinite() || !q.allFinite() || !Aeq.allFinite() || !beq.allFinite() ||
      !Ain.allFinite() || !std::isfinite(c0)) {
    throw DimensionError("QP: non-finite problem data");
  }
}

double QpProblem::objective(const Vector& x) const {
  return 0.5 * x.dot(P * x) + q.dot(x) + c0;
}

std::string to_string(QpStatus status) {
  switch (status) {
    case QpStatus::kOptimal:
      return "optimal";
    case QpStatus::kInfeasible:
      return "infeasible";
    case QpStatus::kMaxIterations:
      return "max-iterations";
    case QpStatus::kUnbounded:
      return "unbounded";
  }
  return "unknown";
}

double KktResiduals::max() const {
  return std::max({stationarity, primal_eq, primal_ineq, complementarity});
}

KktResiduals kkt_residuals(const QpProblem& prob, const Vector& x, const Vector& nu,
                           const Vector& lambda) {
  if (x.size() != prob.n() || nu.size() != prob.Aeq.rows() || lambda.size() != prob.Ain.rows()) {
    throw DimensionError("kkt_residuals: dimension mismatch");
  }
  KktResiduals r;
  Vector stat = prob.P * x + prob.q;
  if (nu.size() > 0) stat += prob.Aeq.transpose() * nu;
  if (lambda.size() > 0) stat += prob.Ain.transpose() * lambda;
  r.stationarity = inf_norm(stat);
  if (nu.size() > 0) r.primal_eq = inf_norm(prob.Aeq * x - prob.beq);
  if (lambda.size() > 0) {
    const Vector ax = prob.Ain * x;
    for (Index i = 0; i < ax.size(); ++i) {
      r.primal_ineq = std::max({r.primal_ineq, prob.lb(i) - ax(i), ax(i) - prob.ub(i)});
      const double up = std::max(lambda(i), 0.0);
      const double lo = std::max(-lambda(i), 0.0);
      const double up_gap = std::isfinite(prob.ub(i)) ? std::abs(prob.ub(i) - ax(i)) : 1.0;
      const double lo_gap = std::isfinite(prob.lb(i)) ? std::abs(ax(i) - prob.lb(i)) : 1.0;
      r.complementarity = std::max({r.complementarity, up * up_gap, lo * lo_gap});
    }
  }
  return r;
}

QpSolution solve(const QpProblem& prob, double tol, int max_iter) {
  QpSettings s;
  s.tol = tol;
  s.max_iter = max_iter;
  return solve(prob, s);
}

QpSolution solve(const QpProblem& prob, const QpSettings& settings) {
  prob.validate();
  if (!(settings.tol > 0.0) || settings.max_iter < 1) {
    throw DimensionError("QP: tolerance and iteration limit must be positive");
  }
  const Index n = prob.n();
  const Index m_eq = prob.Aeq.rows();
  const Index m = prob.Ain.rows();
  const double tol = settings.tol;

  QpSolution sol;
  EqualityFactor ef;
  Reduced red;

  // Equality elimination.
  if (m_eq > 0) {
    ef.present = true;
    const Matrix aeq_t = prob.Aeq.transpose();
    ef.cod_t.setThreshold(default_rank_tolerance(n, m_eq));
    ef.cod_t.compute(aeq_t);

    Eigen::ColPivHouseholderQR<Matrix> qr;
    qr.setThreshold(default_rank_tolerance(n, m_eq));
    qr.compute(aeq_t);
    const Index rank = qr.rank();
    const Matrix q_full = qr.householderQ() * Matrix::Identity(n, n);
    const Matrix range = q_full.leftCols(rank);
    red.Z = q_full.rightCols(n - rank);
    if (rank > 0) {
      const Vector w = (prob.Aeq * range).colPivHouseholderQr().solve(prob.beq);
      red.x0 = range * w;
    } else {
      red.x0 = Vector::Zero(n);
    }
    const double eq_res = inf_norm(prob.Aeq * red.x0 - prob.beq);
    const double eq_limit = std::max(1e3 * tol, 1e-8) * (1.0 + inf_norm(prob.beq));
    if (eq_res > eq_limit) {
      sol.x = red.x0;
      sol.status = QpStatus::kInfeasible;
      sol.ineq_multipliers = Vector::Zero(m);
      sol.eq_multipliers = Vector::Zero(m_eq);
      sol.kkt = kkt_residuals(prob, sol.x, sol.eq_multipliers, sol.ineq_multipliers);
      sol.objective = prob.objective(sol.x);
      return sol;
    }
  } else {
    red.x0 = Vector::Zero(n);
    red.Z = Matrix::Identity(n, n);
  }

  const Index nr = red.Z.cols();
  red.P = red.Z.transpose() * prob.P * red.Z;
  red.P = 0.5 * (red.P + red.P.transpose()).eval();
  red.q = red.Z.transpose() * (prob.P * red.x0 + prob.q);
  red.A = prob.Ain * red.Z;
  const Vector ax0 = prob.Ain * red.x0;
  red.l = prob.lb - ax0;
  red.u = prob.ub - ax0;

  auto finish = [&](const Vector& z, const Vector& lambda, QpStatus status, int iters) {
    sol.x = red.x0 + red.Z * z;
    sol.ineq_multipliers = lambda;
    sol.eq_multipliers = equality_multipliers(prob, ef, sol.x, lambda);
    sol.kkt = kkt_residuals(prob, sol.x, sol.eq_multipliers, sol.ineq_multipliers);
    sol.objective = prob.objective(sol.x);
    sol.iterations = iters;
    sol.status = status;
    if (status == QpStatus::kOptimal && !(sol.kkt.max() <= tol)) {
      sol.status = QpStatus::kMaxIterations;
    }
    return sol;
  };

  // Fully determined by the equalities.
  if (nr == 0) {
    const Vector z = Vector::Zero(0);
    const double viol =
        m > 0 ? std::max((red.l - Vector::Zero(m)).maxCoeff(), (-red.u).maxCoeff()) : 0.0;
    return finish(z, Vector::Zero(m), viol > tol ? QpStatus::kInfeasible : QpStatus::kOptimal, 0);
  }

  // Equality-only problems: one reduced linear solve.
  if (m == 0) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod;
    cod.setThreshold(default_rank_tolerance(nr, nr));
    cod.compute(red.P);
    const Vector z = cod.solve(-red.q);
    const double stat = inf_norm(red.P * z + red.q);
    const bool bounded = stat <= std::max(tol, 1e-9 * (1.0 + inf_norm(red.q)));
    return finish(z, Vector::Zero(0), bounded ? QpStatus::kOptimal : QpStatus::kUnbounded, 0);
  }

  // ADMM on the reduced problem.
  const double rho = settings.rho;
  const double sigma = settings.sigma;
  const double alpha = settings.alpha;
  const Matrix kkt =
      red.P + sigma * Matrix::Identity(nr, nr) + rho * red.A.transpose() * red.A;
  const Eigen::LLT<Matrix> llt(kkt);
  if (llt.info() != Eigen::Success) throw DimensionError("QP: reduced system is not definite");

  Vector x = Vector::Zero(nr);
  Vector z = Vector::Zero(m);
  Vector y = Vector::Zero(m);
  Vector x_prev = x, y_prev = y;

  Vector best_x = x, best_y = y;
  double best_merit = kInf;

  std::vector<int> last_polish_set;
  std::optional<QpSolution> polished_candidate;

  auto reduced_objective_full = [&](const Vector& xr) {
    return prob.objective(red.x0 + red.Z * xr);
  };

  // Active-set polish: 0 inactive, -1 lower, +1 upper (or fixed row).
  auto active_set = [&](const Vector& zz, const Vector& yy) {
    std::vector<int> act(static_cast<std::size_t>(m), 0);
    for (Index i = 0; i < m; ++i) {
      if (std::isfinite(red.l(i)) && zz(i) - red.l(i) < -yy(i)) act[static_cast<std::size_t>(i)] = -1;
      else if (std::isfinite(red.u(i)) && red.u(i) - zz(i) < yy(i)) act[static_cast<std::size_t>(i)] = 1;
    }
    return act;
  };

  auto polish = [&](const std::vector<int>& act) -> std::optional<std::pair<Vector, Vector>> {
    std::vector<Index> rows;
    for (Index i = 0; i < m; ++i) {
      if (act[static_cast<std::size_t>(i)] != 0) rows.push_back(i);
    }
    const Index na = static_cast<Index>(rows.size());
    Matrix k = Matrix::Zero(nr + na, nr + na);
    Vector rhs(nr + na);
    k.topLeftCorner(nr, nr) = red.P;
    rhs.head(nr) = -red.q;
    for (Index r = 0; r < na; ++r) {
      const Index i = rows[static_cast<std::size_t>(r)];
      k.block(nr + r, 0, 1, nr) = red.A.row(i);
      k.block(0, nr + r, nr, 1) = red.A.row(i).transpose();
      rhs(nr + r) = act[static_cast<std::size_t>(i)] < 0 ? red.l(i) : red.u(i);
    }
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod;
    cod.setThreshold(default_rank_tolerance(nr + na, nr + na));
    cod.compute(k);
    const Vector sol_k = cod.solve(rhs);
    if (!sol_k.allFinite()) return std::nullopt;
    Vector yy = Vector::Zero(m);
    for (Index r = 0; r < na; ++r) yy(rows[static_cast<std::size_t>(r)]) = sol_k(nr + r);
    return std::make_pair(Vector(sol_k.head(nr)), yy);
  };

  const int check_every = std::max(1, settings.check_every);
  for (int it = 1; it <= settings.max_iter; ++it) {
    x_prev = x;
    y_prev = y;
    const Vector rhs = sigma * x - red.q + red.A.transpose() * (rho * z - y);
    const Vector x_tilde = llt.solve(rhs);
    const Vector z_tilde = red.A * x_tilde;
    x = alpha * x_tilde + (1.0 - alpha) * x;
    const Vector z_relaxed = alpha * z_tilde + (1.0 - alpha) * z;
    const Vector z_next = (z_relaxed + y / rho).cwiseMax(red.l).cwiseMin(red.u);
    y += rho * (z_relaxed - z_next);
    z = z_next;

    if (it % check_every != 0 && it != settings.max_iter) continue;

    const Vector ax = red.A * x;
    const Vector px = red.P * x;
    const Vector aty = red.A.transpose() * y;
    const double r_prim = inf_norm(ax - z);
    const double r_dual = inf_norm(px + red.q + aty);
    const double merit = std::max(r_prim, r_dual);
    const bool accepted = merit < best_merit;
    if (accepted) {
      best_merit = merit;
      best_x = x;
      best_y = y;
    }
    if (settings.record_trace) {
      sol.trace.push_back({it, reduced_objective_full(x), r_prim, r_dual, accepted});
    }

    if (settings.polish) {
      const std::vector<int> act = active_set(z, y);
      if (act != last_polish_set) {
        last_polish_set = act;
        if (auto pol = polish(act)) {
          QpSolution trial = sol;
          trial.polished = true;
          finish(pol->first, pol->second, QpStatus::kOptimal, it);
          if (sol.status == QpStatus::kOptimal) {
            sol.polished = true;
            return sol;
          }
          sol = trial;
          sol.polished = false;
        }
      }
    }

    const double eps_prim = tol * (1.0 + std::max(inf_norm(ax), inf_norm(z)));
    const double eps_dual =
        tol * (1.0 + std::max({inf_norm(px), inf_norm(aty), inf_norm(red.q)}));
    if (r_prim <= eps_prim && r_dual <= eps_dual) {
      finish(x, y, QpStatus::kOptimal, it);
      if (sol.status == QpStatus::kOptimal) return sol;
    }

    // Infeasibility certificates from successive differences.
    const double cert_eps = 1e-7;
    const Vector dy = y - y_prev;
    const double dy_norm = inf_norm(dy);
    if (dy_norm > 1e-12) {
      bool finite_support = true;
      double support = 0.0;
      for (Index i = 0; i < m; ++i) {
        if (dy(i) > 0.0) {
          if (!std::isfinite(red.u(i))) finite_support = false;
          else support += red.u(i) * dy(i);
        } else if (dy(i) < 0.0) {
          if (!std::isfinite(red.l(i))) finite_support = false;
          else support += red.l(i) * dy(i);
        }
      }
      if (finite_support && inf_norm(red.A.transpose() * dy) <= cert_eps * dy_norm &&
          support < -cert_eps * dy_norm) {
        finish(best_x, best_y, QpStatus::kInfeasible, it);
        return sol;
      }
    }
    const Vector dx = x - x_prev;
    const double dx_norm = inf_norm(dx);
    if (dx_norm > 1e-12 && inf_norm(red.P * dx) <= cert_eps * dx_norm &&
        red.q.dot(dx) < -cert_eps * dx_norm) {
      const Vector adx = red.A * dx;
      bool recession = true;
      for (Index i = 0; i < m && recession; ++i) {
        const double lim = cert_eps * dx_norm;
        if (std::isfinite(red.u(i)) && adx(i) > lim) recession = false;
        if (std::isfinite(red.l(i)) && adx(i) < -lim) recession = false;
      }
      if (recession) {
        finish(best_x, best_y, QpStatus::kUnbounded, it);
        return sol;
      }
    }
  }

  finish(best_x, best_y, QpStatus::kMaxIterations, settings.max_iter);
  if (sol.status == QpStatus::kOptimal) sol.status = QpStatus::kMaxIterations;
  return sol;
}

}  // namespace lpvdpc
