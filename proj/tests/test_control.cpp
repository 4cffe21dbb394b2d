#include "lpvdpc/control.hpp"
#include "lpvdpc/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace lpvdpc;

namespace {

DpcConfig example1_config() {
  DpcConfig cfg;
  cfg.N_p = 5;
  cfg.n_ell = 2;
  cfg.Q = Matrix::Constant(1, 1, 10.0);
  cfg.R = Matrix::Constant(1, 1, 0.001);
  cfg.u_box = Box::interval(-5.0, 5.0);
  cfg.y_box = Box::interval(-1.0, 1.0);
  return cfg;
}

DataDictionary example1_dictionary() {
  const ScheduledIoSource io{example1_model(), [](Index n) { return example1_scheduling(n); }};
  return generate_dictionary(io, UniformExcitation{-1.0, 1.0}, 48, 42, 7);
}

LpvIoModel first_order() {
  Matrix a1(1, 1), b1(1, 1);
  a1 << -0.5;
  b1 << 1.0;
  return LpvIoModel(1, 1, 0, {a1}, {b1});
}

IoLoopPlant example1_plant() {
  return IoLoopPlant{example1_model(), [](Index k) { return example1_scheduling(1, k).at(1); }, 1.0};
}

}  // namespace

TEST_CASE("block repetition") {
  Matrix w(2, 2);
  w << 1, 2, 3, 4;
  const Matrix r = repeat_block(w, 3);
  CHECK(r.rows() == 6);
  CHECK(r.block(2, 2, 2, 2) == w);
  CHECK(r.block(0, 2, 2, 2).norm() == 0.0);
  const Box b = repeat_box(Box::interval(-1.0, 2.0), 4);
  CHECK(b.lower.size() == 4);
  CHECK(b.upper(3) == 2.0);
}

TEST_CASE("configuration checks") {
  DpcConfig cfg = example1_config();
  CHECK_NOTHROW(cfg.validate(1, 1));
  cfg.Q = Matrix::Constant(1, 1, -1.0);
  CHECK_THROWS_AS(cfg.validate(1, 1), ConfigError);
  cfg = example1_config();
  cfg.N_p = 0;
  CHECK_THROWS_AS(cfg.validate(1, 1), ConfigError);
  cfg = example1_config();
  cfg.u_box = Box::interval(1.0, -1.0);
  CHECK_THROWS_AS(cfg.validate(1, 1), ConfigError);
  cfg = example1_config();
  CHECK_THROWS_AS(cfg.validate(2, 1), ConfigError);
  CHECK(to_string(SchedulingPolicy::kFrozen) == "frozen");
  CHECK(to_string(SchedulingPolicy::kKnownFuture) == "known-future");
}

TEST_CASE("quadratic program of a single step, by hand") {
  // y_hat = 2 + 3 u, r = 1, Q = 4, R = 5
  AffinePrediction pred{Vector::Constant(1, 2.0), Matrix::Constant(1, 1, 3.0)};
  DpcConfig cfg;
  cfg.N_p = 1;
  cfg.n_ell = 1;
  cfg.Q = Matrix::Constant(1, 1, 4.0);
  cfg.R = Matrix::Constant(1, 1, 5.0);
  cfg.u_box = Box::interval(-0.1, 0.1);
  cfg.y_box = Box::interval(-10.0, 10.0);
  const QpProblem qp = build_mpc_qp(pred, SignalSequence(Matrix::Constant(1, 1, 1.0)), cfg);
  CHECK(qp.P(0, 0) == doctest::Approx(82.0));
  CHECK(qp.q(0) == doctest::Approx(24.0));
  CHECK(qp.c0 == doctest::Approx(4.0));
  for (double u : {-1.0, 0.0, 0.3}) {
    CHECK(qp.objective(Vector::Constant(1, u)) ==
          doctest::Approx(4.0 * (1.0 + 3.0 * u) * (1.0 + 3.0 * u) + 5.0 * u * u));
  }
  REQUIRE(qp.Ain.rows() == 2);
  CHECK(qp.Ain(1, 0) == 3.0);
  CHECK(qp.lb(1) == doctest::Approx(-12.0));
  CHECK(qp.ub(1) == doctest::Approx(8.0));

  // unconstrained optimum -24/82 is clipped at -0.1
  const QpSolution sol = solve(qp);
  CHECK(sol.status == QpStatus::kOptimal);
  CHECK(std::abs(sol.x(0) + 0.1) < 1e-10);
  CHECK(sol.kkt.max() < 1e-10);
  CHECK(std::abs(sol.ineq_multipliers(0) + sol.ineq_multipliers(1) * 3.0 + 15.8) < 1e-8);
}

TEST_CASE("unrolled prediction of a first-order system") {
  const LpvIoModel m = first_order();
  Matrix u0(1, 1), y0(1, 1);
  u0 << 0.4;
  y0 << 2.0;
  const InitialWindow past{SignalSequence(u0), SignalSequence::zeros(0, 1), SignalSequence(y0)};
  const AffinePrediction pred = unroll_prediction(m, past, SignalSequence::zeros(0, 3));
  // free response y_1 = 0.5 * 2 + 0.4, then halves
  CHECK(pred.phi(0) == doctest::Approx(1.4));
  CHECK(pred.phi(1) == doctest::Approx(0.7));
  CHECK(pred.phi(2) == doctest::Approx(0.35));
  Matrix gamma(3, 3);
  gamma << 0, 0, 0, 1, 0, 0, 0.5, 1, 0;
  CHECK((pred.gamma - gamma).norm() < 1e-14);
}

TEST_CASE("buffer keeps the newest records") {
  DpcConfig cfg = example1_config();
  MpcController mpc(example1_model(), cfg);
  Matrix u(1, 3), y(1, 3);
  u << 1, 2, 3;
  y << 4, 5, 6;
  mpc.reset(InitialWindow{SignalSequence(u), example1_scheduling(3), SignalSequence(y)});
  REQUIRE(mpc.past().u.length() == 2);
  CHECK(mpc.past().u.value(1, 1) == 2.0);
  CHECK(mpc.past().y.value(2, 1) == 6.0);
  CHECK(mpc.past().p.value(1, 1) == example1_scheduling(1, 2).value(1, 1));
  mpc.push(Vector::Constant(1, 7.0), Vector::Constant(2, 0.1), Vector::Constant(1, 8.0));
  CHECK(mpc.past().u.value(1, 1) == 3.0);
  CHECK(mpc.past().u.value(2, 1) == 7.0);
  CHECK(mpc.past().p.value(2, 2) == 0.1);
  CHECK(mpc.past().y.value(2, 1) == 8.0);
  CHECK_THROWS_AS(mpc.reset(InitialWindow::zeros(1, 2, 1, 1)), InitializationError);
  CHECK_THROWS_AS(mpc.push(Vector::Zero(2), Vector::Zero(2), Vector::Zero(1)), DimensionError);
}

TEST_CASE("scheduling policies") {
  DpcConfig cfg = example1_config();
  cfg.sched_policy = SchedulingPolicy::kFrozen;
  MpcController frozen(example1_model(), cfg);
  const SignalSequence p1 = example1_scheduling(1, 4);
  const SignalSequence ph = frozen.resolve_schedule(p1);
  REQUIRE(ph.length() == 5);
  for (Index k = 1; k <= 5; ++k) CHECK(ph.at(k) == p1.at(1));

  cfg.sched_policy = SchedulingPolicy::kKnownFuture;
  MpcController known(example1_model(), cfg);
  const SignalSequence p7 = example1_scheduling(7, 4);
  CHECK(known.resolve_schedule(p7).samples() == p7.slice(1, 5).samples());
  CHECK_THROWS(known.resolve_schedule(p1));
}

TEST_CASE("reference window holds the last value") {
  Matrix r(1, 4);
  r << 1, 2, 3, 4;
  const SignalSequence w = reference_window(SignalSequence(r), 3, 5);
  Matrix expect(1, 5);
  expect << 3, 4, 4, 4, 4;
  CHECK(w.samples() == expect);
  CHECK(reference_window(SignalSequence(r), 9, 2).samples() == Matrix::Constant(1, 2, 4.0));
}

TEST_CASE("zero reference from rest stays at rest") {
  const DpcConfig cfg = example1_config();
  DpcController dpc(example1_dictionary(), cfg, 2);
  MpcController mpc(example1_model(), cfg);
  const SignalSequence r = SignalSequence::zeros(1, 15);
  for (PredictiveController* c : {static_cast<PredictiveController*>(&dpc),
                                  static_cast<PredictiveController*>(&mpc)}) {
    const TrajectoryLog log =
        closed_loop(example1_plant(), *c, r, 15, InitialWindow::zeros(1, 2, 1, 2));
    REQUIRE(log.size() == 15);
    for (const StepRecord& rec : log.records) {
      CHECK(std::abs(rec.y(0)) < 1e-9);
      CHECK(std::abs(rec.u(0)) < 1e-9);
      CHECK(rec.status == QpStatus::kOptimal);
    }
    CHECK(log.records[3].k == 4);
    CHECK(log.records[3].t == 3.0);
  }
}

TEST_CASE("data-driven and model-based steps coincide") {
  const DpcConfig cfg = example1_config();
  DpcController dpc(example1_dictionary(), cfg, 2);
  MpcController mpc(example1_model(), cfg);
  Matrix u(1, 2), y(1, 2);
  u << 0.3, -0.6;
  y << 0.2, -0.1;
  const InitialWindow init{SignalSequence(u), example1_scheduling(2, 9), SignalSequence(y)};
  dpc.reset(init);
  mpc.reset(init);
  const SignalSequence ref = SignalSequence::constant(Vector::Constant(1, 0.8), 5);
  const SignalSequence p = example1_scheduling(5, 11);
  const StepResult a = dpc.solve(ref, p);
  const StepResult b = mpc.solve(ref, p);
  CHECK((a.u_plan.samples() - b.u_plan.samples()).norm() < 1e-6);
  CHECK((a.y_plan.samples() - b.y_plan.samples()).norm() < 1e-6);
  CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-7));
  CHECK(a.u(0) == a.u_plan.value(1, 1));
  CHECK(dpc.steps_taken() == 1);
  // applied plan reproduces the model prediction
  const SignalSequence ysim = simulate_io(example1_model(), b.u_plan, p, init);
  CHECK((ysim.samples() - b.y_plan.samples()).norm() < 1e-9);
}

TEST_CASE("infeasible step is reported") {
  DpcConfig cfg = example1_config();
  cfg.y_box = Box::interval(0.5, 0.6);
  MpcController mpc(example1_model(), cfg);
  mpc.reset(InitialWindow::zeros(1, 2, 1, 2));
  try {
    mpc.solve(SignalSequence::zeros(1, 5), example1_scheduling(5));
    FAIL("expected InfeasibleStepError");
  } catch (const InfeasibleStepError& e) {
    CHECK(e.step() == 1);
  }
  MpcController again(example1_model(), cfg);
  try {
    closed_loop(example1_plant(), again, SignalSequence::zeros(1, 5), 5,
                InitialWindow::zeros(1, 2, 1, 2));
    FAIL("expected ClosedLoopAbort");
  } catch (const ClosedLoopAbort& e) {
    CHECK(e.step() == 1);
    CHECK(e.partial().size() == 0);
    CHECK_THROWS_AS(std::rethrow_exception(e.cause()), InfeasibleStepError);
  }
}

TEST_CASE("tracking metrics") {
  TrajectoryLog log;
  log.Q = Matrix::Constant(1, 1, 10.0);
  log.R = Matrix::Constant(1, 1, 2.0);
  log.u_box = Box::interval(-1.0, 1.0);
  log.y_box = Box::interval(-0.5, 0.5);
  StepRecord a;
  a.r = Vector::Zero(1);
  a.y = Vector::Constant(1, 1.0);
  a.u = Vector::Zero(1);
  StepRecord b = a;
  b.y = Vector::Zero(1);
  b.u = Vector::Constant(1, 1.5);
  log.records = {a};
  TrackingMetrics m = tracking_metrics(log);
  CHECK(m.total_cost == doctest::Approx(10.0));
  CHECK(m.rmse == doctest::Approx(1.0));
  CHECK(m.max_violation_y == doctest::Approx(0.5));
  CHECK(m.max_violation_u == 0.0);
  log.records = {a, b};
  m = tracking_metrics(log);
  CHECK(m.total_cost == doctest::Approx(10.0 + 4.5));
  CHECK(m.rmse == doctest::Approx(std::sqrt(0.5)));
  CHECK(m.max_violation_u == doctest::Approx(0.5));
  log.records.clear();
  CHECK_THROWS_AS(tracking_metrics(log), DimensionError);
}
