#include "lpvdpc/errors.hpp"
#include "lpvdpc/qpcore.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <limits>
#include <random>

using namespace lpvdpc;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

QpProblem box_problem(Matrix P, Vector q, Matrix Ain, Vector lb, Vector ub) {
  QpProblem prob = QpProblem::unconstrained(std::move(P), std::move(q));
  prob.Ain = std::move(Ain);
  prob.lb = std::move(lb);
  prob.ub = std::move(ub);
  return prob;
}

}  // namespace

TEST_CASE("clipped scalar optimum") {
  // (x - 1)^2 = x^2 - 2x + 1
  QpProblem prob = box_problem(Matrix::Constant(1, 1, 2.0), Vector::Constant(1, -2.0),
                               Matrix::Identity(1, 1), Vector::Constant(1, -kInf),
                               Vector::Constant(1, 0.0));
  prob.c0 = 1.0;
  const QpSolution sol = solve(prob);
  CHECK(sol.status == QpStatus::kOptimal);
  CHECK(sol.x(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(sol.objective == doctest::Approx(1.0));
  // Upper bound active: positive multiplier 2.
  CHECK(sol.ineq_multipliers(0) == doctest::Approx(2.0));
  CHECK(sol.kkt.max() <= 1e-9);
}

TEST_CASE("projection onto a hyperplane") {
  QpProblem prob = QpProblem::unconstrained(Matrix::Identity(2, 2), Vector::Zero(2));
  prob.Aeq = Matrix::Ones(1, 2);
  prob.beq = Vector::Ones(1);
  const QpSolution sol = solve(prob);
  CHECK(sol.status == QpStatus::kOptimal);
  CHECK(sol.iterations == 0);
  CHECK(sol.x(0) == doctest::Approx(0.5));
  CHECK(sol.x(1) == doctest::Approx(0.5));
  CHECK(sol.eq_multipliers(0) == doctest::Approx(-0.5));
}

TEST_CASE("inconsistent equalities are infeasible") {
  QpProblem prob = QpProblem::unconstrained(Matrix::Identity(2, 2), Vector::Zero(2));
  prob.Aeq.resize(2, 2);
  prob.Aeq << 1, 1, 2, 2;
  prob.beq = Vector(2);
  prob.beq << 1, 3;
  CHECK(solve(prob).status == QpStatus::kInfeasible);
}

TEST_CASE("contradicting boxes are infeasible") {
  // x1 + x2 in [2, 3] but x1, x2 in [-1, 0.5]
  Matrix A(3, 2);
  A << 1, 1, 1, 0, 0, 1;
  Vector lb(3), ub(3);
  lb << 2, -1, -1;
  ub << 3, 0.5, 0.5;
  const QpSolution sol = solve(box_problem(Matrix::Identity(2, 2), Vector::Zero(2), A, lb, ub));
  CHECK(sol.status == QpStatus::kInfeasible);
}

TEST_CASE("unbounded linear objective") {
  QpProblem prob = box_problem(Matrix::Zero(2, 2), Vector::Constant(2, -1.0),
                               Matrix::Identity(1, 2), Vector::Constant(1, -1.0),
                               Vector::Constant(1, 1.0));
  const QpStatus st = solve(prob).status;
  CHECK(st == QpStatus::kUnbounded);

  QpProblem eq_only = QpProblem::unconstrained(Matrix::Zero(2, 2), Vector::Constant(2, 1.0));
  CHECK(solve(eq_only).status == QpStatus::kUnbounded);
}

TEST_CASE("rank-deficient cost with boxes") {
  // min (x1 + x2 - 3)^2 with both in [0, 1]: optimum x = (1, 1), value 1.
  Matrix P = Matrix::Constant(2, 2, 2.0);
  Vector q = Vector::Constant(2, -6.0);
  QpProblem prob = box_problem(P, q, Matrix::Identity(2, 2), Vector::Zero(2), Vector::Ones(2));
  prob.c0 = 9.0;
  const QpSolution sol = solve(prob);
  CHECK(sol.status == QpStatus::kOptimal);
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(sol.kkt.max() <= 1e-9);
}

TEST_CASE("validate rejects malformed problems") {
  QpProblem prob = QpProblem::unconstrained(Matrix::Identity(2, 2), Vector::Zero(2));
  prob.P(0, 1) = 1.0;
  CHECK_THROWS_AS(solve(prob), DimensionError);
  QpProblem bad_box = box_problem(Matrix::Identity(1, 1), Vector::Zero(1), Matrix::Identity(1, 1),
                                  Vector::Constant(1, 1.0), Vector::Constant(1, 0.0));
  CHECK_THROWS_AS(solve(bad_box), DimensionError);
  QpProblem bad_shape = QpProblem::unconstrained(Matrix::Identity(3, 3), Vector::Zero(2));
  CHECK_THROWS_AS(solve(bad_shape), DimensionError);
}

TEST_CASE("kkt residual definitions") {
  QpProblem prob = QpProblem::unconstrained(Matrix::Identity(2, 2), Vector::Constant(2, -1.0));
  const Vector xstar = Vector::Ones(2);
  CHECK(kkt_residuals(prob, xstar, Vector(0), Vector(0)).max() == 0.0);
  CHECK(kkt_residuals(prob, Vector::Zero(2), Vector(0), Vector(0)).stationarity > 0.0);

  QpProblem boxed = box_problem(Matrix::Identity(1, 1), Vector::Zero(1), Matrix::Identity(1, 1),
                                Vector::Constant(1, -1.0), Vector::Constant(1, 1.0));
  const KktResiduals r = kkt_residuals(boxed, Vector::Constant(1, 2.0), Vector(0),
                                       Vector::Constant(1, -0.5));
  CHECK(r.primal_ineq == doctest::Approx(1.0));
  CHECK(r.stationarity == doctest::Approx(1.5));
  CHECK(r.complementarity == doctest::Approx(1.5));  // 0.5 * |2 - (-1)|
}

TEST_CASE("random QPs agree with active-set enumeration") {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 60; ++trial) {
    const Index n_red = 1 + trial % 6;
    const Index n_eq = trial % 3;
    const Index m = 1 + (trial * 5) % 6;
    const QpProblem prob = oracle::random_qp(gen, n_red, n_eq, m);
    const auto ref = oracle::enumerate_qp(prob);
    REQUIRE(ref.has_value());
    const QpSolution sol = solve(prob);
    INFO("trial " << trial);
    CHECK(sol.status == QpStatus::kOptimal);
    CHECK(std::abs(sol.objective - *ref) <= 1e-8 * (1.0 + std::abs(*ref)));
    CHECK(sol.kkt.max() <= 1e-9);
  }
}

TEST_CASE("trace: optimality gap shrinks across accepted iterates") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 40; ++trial) {
    const QpProblem prob = oracle::random_qp(gen, 1 + trial % 6, trial % 3, 1 + trial % 6);
    QpSettings s;
    s.polish = false;
    s.record_trace = true;
    const QpSolution sol = solve(prob, s);
    CHECK(sol.status == QpStatus::kOptimal);
    REQUIRE(!sol.trace.empty());
    double last_merit = std::numeric_limits<double>::infinity();
    double last_gap = std::numeric_limits<double>::infinity();
    for (const QpTracePoint& pt : sol.trace) {
      if (!pt.accepted) continue;
      const double merit = std::max(pt.primal_residual, pt.dual_residual);
      CHECK(merit < last_merit);
      last_merit = merit;
      if (merit >= 1e-4) continue;
      const double gap = std::abs(pt.objective - sol.objective);
      CHECK(gap <= last_gap * (1.0 + 1e-9) + 1e-12);
      last_gap = gap;
    }
  }
}

TEST_CASE("fixed zero initialization is deterministic") {
  std::mt19937_64 gen(3);
  const QpProblem prob = oracle::random_qp(gen, 5, 2, 4);
  const QpSolution a = solve(prob);
  const QpSolution b = solve(prob);
  CHECK(a.x == b.x);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("max-iterations returns best iterate") {
  std::mt19937_64 gen(5);
  const QpProblem prob = oracle::random_qp(gen, 6, 0, 6);
  QpSettings s;
  s.max_iter = 3;
  s.check_every = 1;
  s.polish = false;
  const QpSolution sol = solve(prob, s);
  CHECK(sol.status == QpStatus::kMaxIterations);
  CHECK(sol.iterations == 3);
  CHECK(sol.x.allFinite());
}
