#pragma once

// Independent reference computations shared by unit and acceptance tests.

#include "lpvdpc/qpcore.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <random>

namespace oracle {

using lpvdpc::Index;
using lpvdpc::Matrix;
using lpvdpc::Vector;

// Exhaustive active-set enumeration for strictly convex QPs: every row of Ain
// is free, at its lower bound or at its upper bound. Each pattern gives the
// minimizer on an affine face; the best primal-feasible one is the optimum.
inline std::optional<double> enumerate_qp(const lpvdpc::QpProblem& prob, Vector* x_best = nullptr) {
  const Index n = prob.n();
  const Index me = prob.Aeq.rows();
  const Index m = prob.Ain.rows();
  long patterns = 1;
  for (Index i = 0; i < m; ++i) patterns *= 3;
  double best = std::numeric_limits<double>::infinity();
  bool found = false;
  for (long code = 0; code < patterns; ++code) {
    std::vector<Index> rows;
    std::vector<double> rhs_vals;
    long c = code;
    bool skip = false;
    for (Index i = 0; i < m; ++i) {
      const int s = static_cast<int>(c % 3);
      c /= 3;
      if (s == 1) {
        if (!std::isfinite(prob.lb(i))) skip = true;
        rows.push_back(i);
        rhs_vals.push_back(prob.lb(i));
      } else if (s == 2) {
        if (!std::isfinite(prob.ub(i)) || prob.lb(i) == prob.ub(i)) skip = true;
        rows.push_back(i);
        rhs_vals.push_back(prob.ub(i));
      }
    }
    if (skip) continue;
    const Index na = static_cast<Index>(rows.size());
    Matrix C(me + na, n);
    Vector d(me + na);
    C.topRows(me) = prob.Aeq;
    d.head(me) = prob.beq;
    for (Index r = 0; r < na; ++r) {
      C.row(me + r) = prob.Ain.row(rows[static_cast<std::size_t>(r)]);
      d(me + r) = rhs_vals[static_cast<std::size_t>(r)];
    }
    Matrix K = Matrix::Zero(n + me + na, n + me + na);
    K.topLeftCorner(n, n) = prob.P;
    K.topRightCorner(n, me + na) = C.transpose();
    K.bottomLeftCorner(me + na, n) = C;
    Vector rhs(n + me + na);
    rhs << -prob.q, d;
    Eigen::FullPivLU<Matrix> lu(K);
    if (!lu.isInvertible()) continue;
    const Vector sol = lu.solve(rhs);
    const Vector x = sol.head(n);
    if (me > 0 && (prob.Aeq * x - prob.beq).lpNorm<Eigen::Infinity>() > 1e-9) continue;
    const Vector ax = prob.Ain * x;
    bool feasible = true;
    for (Index i = 0; i < m; ++i) {
      if (ax(i) < prob.lb(i) - 1e-10 || ax(i) > prob.ub(i) + 1e-10) feasible = false;
    }
    if (!feasible) continue;
    const double obj = prob.objective(x);
    if (obj < best) {
      best = obj;
      found = true;
      if (x_best) *x_best = x;
    }
  }
  if (!found) return std::nullopt;
  return best;
}

// Random strictly convex QP with `n_red` free directions left after `n_eq`
// equalities, and `m` box-constrained affine rows. Bounds are arranged so that
// x = x_feas is strictly feasible.
inline lpvdpc::QpProblem random_qp(std::mt19937_64& gen, Index n_red, Index n_eq, Index m) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.05, 1.5);
  const Index n = n_red + n_eq;
  auto randn = [&](Index r, Index c) {
    Matrix a(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) a(i, j) = nd(gen);
    return a;
  };
  lpvdpc::QpProblem prob;
  const Matrix L = randn(n, n);
  prob.P = L * L.transpose() + 0.1 * Matrix::Identity(n, n);
  prob.q = randn(n, 1) * 3.0;
  prob.c0 = nd(gen);
  const Vector x_feas = randn(n, 1) * 0.3;
  prob.Aeq = randn(n_eq, n);
  prob.beq = prob.Aeq * x_feas;
  prob.Ain = randn(m, n);
  const Vector ax = prob.Ain * x_feas;
  prob.lb.resize(m);
  prob.ub.resize(m);
  for (Index i = 0; i < m; ++i) {
    prob.lb(i) = ax(i) - ud(gen);
    prob.ub(i) = ax(i) + ud(gen);
    const double roll = std::uniform_real_distribution<double>(0.0, 1.0)(gen);
    if (roll < 0.1) prob.lb(i) = -std::numeric_limits<double>::infinity();
    else if (roll < 0.2) prob.ub(i) = std::numeric_limits<double>::infinity();
  }
  return prob;
}

}  // namespace oracle
