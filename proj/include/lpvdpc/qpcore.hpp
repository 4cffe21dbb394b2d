#pragma once

/// \file qpcore.hpp
/// \brief Dense convex QP solver for problems of the form
///
///   minimize    1/2 x' P x + q' x + c0
///   subject to  Aeq x = beq,   lb <= Ain x <= ub
///
/// with P symmetric positive semidefinite. Equalities are eliminated through
/// a rank-revealing QR factorization of Aeq'; the reduced problem is solved by
/// an over-relaxed ADMM iteration with a fixed penalty, and converged iterates
/// are polished by solving the KKT system on the detected active set.

#include "lpvdpc/signals.hpp"

#include <string>
#include <vector>

namespace lpvdpc {

struct QpProblem {
  Matrix P;
  Vector q;
  double c0 = 0.0;
  Matrix Aeq;
  Vector beq;
  Matrix Ain;
  Vector lb;
  Vector ub;

  Index n() const { return q.size(); }

  /// Empty constraint blocks of the right width for an n-variable problem.
  static QpProblem unconstrained(Matrix P, Vector q, double c0 = 0.0);

  /// \throws DimensionError when shapes disagree, P is not symmetric
  ///         within 1e-12 (relative), or lb > ub somewhere.
  void validate() const;

  double objective(const Vector& x) const;
};

enum class QpStatus { kOptimal, kInfeasible, kMaxIterations, kUnbounded };

std::string to_string(QpStatus status);

/// Infinity norms of the KKT conditions at (x, nu, lambda).
struct KktResiduals {
  double stationarity = 0.0;
  double primal_eq = 0.0;
  double primal_ineq = 0.0;
  double complementarity = 0.0;

  double max() const;
};

struct QpSettings {
  double tol = 1e-9;
  int max_iter = 50000;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  int check_every = 10;
  bool polish = true;
  bool record_trace = false;
};

/// Objective and ADMM residuals at one convergence check.
struct QpTracePoint {
  int iteration = 0;
  double objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  /// True when this iterate became the best iterate so far (smallest
  /// max(primal, dual) residual).
  bool accepted = false;
};

struct QpSolution {
  Vector x;
  /// Equality multipliers nu and inequality multipliers lambda in
  /// P x + q + Aeq' nu + Ain' lambda = 0; lambda_i > 0 means the upper bound
  /// of row i is active, lambda_i < 0 the lower bound.
  Vector eq_multipliers;
  Vector ineq_multipliers;
  double objective = 0.0;
  QpStatus status = QpStatus::kMaxIterations;
  KktResiduals kkt;
  int iterations = 0;
  bool polished = false;
  std::vector<QpTracePoint> trace;
};

/// KKT residuals on the original problem. Complementarity is the largest
/// product of a multiplier's active-side magnitude with the slack of that
/// bound; a nonzero multiplier on an infinite bound counts in full.
KktResiduals kkt_residuals(const QpProblem& prob, const Vector& x, const Vector& eq_multipliers,
                           const Vector& ineq_multipliers);

/// Solves the QP. status == kOptimal guarantees kkt.max() <= settings.tol.
QpSolution solve(const QpProblem& prob, const QpSettings& settings = {});
QpSolution solve(const QpProblem& prob, double tol, int max_iter);

}  // namespace lpvdpc
