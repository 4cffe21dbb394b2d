#include "lpvdpc/control.hpp"

#include "lpvdpc/errors.hpp"

#include <chrono>
#include <cmath>
#include <string>

namespace lpvdpc {

namespace {

bool is_psd(const Matrix& w) {
  if (w.rows() != w.cols()) return false;
  if (w.size() == 0) return true;
  const double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
  if ((w - w.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> es(w, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -1e-12 * scale;
}

void check_box(const Box& box, Index dim, const char* name) {
  if (box.lower.size() != dim || box.upper.size() != dim) {
    throw ConfigError(std::string(name) + " must have dimension " + std::to_string(dim));
  }
  for (Index i = 0; i < dim; ++i) {
    if (!(box.lower(i) <= box.upper(i))) throw ConfigError(std::string(name) + " is empty");
  }
}

void check_sequence(const SignalSequence& s, Index len, Index dim, const char* name) {
  if (s.length() != len || s.dim() != dim) {
    throw DimensionError(std::string(name) + " must be " + std::to_string(len) +
                         " samples of dimension " + std::to_string(dim) + ", got " +
                         std::to_string(s.length()) + " x " + std::to_string(s.dim()));
  }
}

// Quadratic tracking cost over stacked predictions y = Y x + y0, u = U x + u0.
void tracking_cost(const Matrix& Y, const Vector& y0, const Matrix& U, const Vector& u0,
                   const Vector& r, const Matrix& Qbar, const Matrix& Rbar, QpProblem& prob) {
  const Vector ey = y0 - r;
  const Matrix qy = Qbar * Y;
  const Matrix ru = Rbar * U;
  prob.P = 2.0 * (Y.transpose() * qy + U.transpose() * ru);
  prob.P = 0.5 * (prob.P + prob.P.transpose()).eval();
  prob.q = 2.0 * (qy.transpose() * ey + ru.transpose() * u0);
  prob.c0 = ey.dot(Qbar * ey) + u0.dot(Rbar * u0);
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::string to_string(SchedulingPolicy policy) {
  return policy == SchedulingPolicy::kKnownFuture ? "known-future" : "frozen";
}

void DpcConfig::validate(Index n_u, Index n_y) const {
  if (N_p < 1) throw ConfigError("prediction horizon N_p must be at least 1");
  if (n_ell < 1) throw ConfigError("past window n_ell must be at least 1");
  if (Q.rows() != n_y || !is_psd(Q)) throw ConfigError("Q must be a symmetric PSD n_y x n_y matrix");
  if (R.rows() != n_u || !is_psd(R)) throw ConfigError("R must be a symmetric PSD n_u x n_u matrix");
  check_box(u_box, n_u, "input box");
  check_box(y_box, n_y, "output box");
  if (p_set) {
    for (Index i = 0; i < p_set->lower.size(); ++i) {
      if (!(p_set->lower(i) <= p_set->upper(i))) throw ConfigError("scheduling set is empty");
    }
  }
  if (!(reg >= 0.0)) throw ConfigError("regularization must be nonnegative");
}

Matrix repeat_block(const Matrix& w, Index count) {
  Matrix out = Matrix::Zero(w.rows() * count, w.cols() * count);
  for (Index i = 0; i < count; ++i) out.block(i * w.rows(), i * w.cols(), w.rows(), w.cols()) = w;
  return out;
}

Box repeat_box(const Box& box, Index count) {
  Box out;
  out.lower = box.lower.replicate(count, 1);
  out.upper = box.upper.replicate(count, 1);
  return out;
}

QpProblem build_dpc_qp(const PredictorBlocks& blk, const InitialWindow& past,
                       const SignalSequence& ref_window, const SignalSequence& p_hat,
                       const DpcConfig& cfg) {
  if (blk.n_ell != cfg.n_ell || blk.horizon != cfg.N_p) {
    throw DimensionError("predictor blocks were built for n_ell = " + std::to_string(blk.n_ell) +
                         ", L = " + std::to_string(blk.horizon));
  }
  const Index np = cfg.N_p;
  check_sequence(ref_window, np, blk.n_y, "reference window");
  check_sequence(p_hat, np, blk.n_p, "future scheduling");
  if (cfg.Q.rows() != blk.n_y || cfg.Q.cols() != blk.n_y || cfg.R.rows() != blk.n_u ||
      cfg.R.cols() != blk.n_u) {
    throw DimensionError("weights do not match the dictionary dimensions");
  }
  if (cfg.u_box.lower.size() != blk.n_u || cfg.y_box.lower.size() != blk.n_y) {
    throw DimensionError("constraint boxes do not match the dictionary dimensions");
  }

  PredictionWindows w{past.u, past.p, past.y, SignalSequence::zeros(blk.n_u, np), p_hat};
  const EqualitySystem sys = assemble_equality(blk, w);
  const Index uf0 = sys.offsets[static_cast<int>(RowGroup::kFutureInput)];
  const Index uf1 = sys.offsets[static_cast<int>(RowGroup::kFutureInputLift)];
  const Index total = sys.offsets[7];
  const Index kernel = cfg.data_range_restriction ? blk.data_kernel.cols() : 0;
  const Index n_eq = total - (uf1 - uf0) + kernel;

  QpProblem prob;
  prob.Aeq.resize(n_eq, blk.n_cols);
  prob.beq = Vector::Zero(n_eq);
  prob.Aeq.topRows(uf0) = sys.A.topRows(uf0);
  prob.beq.head(uf0) = sys.b.head(uf0);
  prob.Aeq.middleRows(uf0, total - uf1) = sys.A.bottomRows(total - uf1);
  prob.beq.segment(uf0, total - uf1) = sys.b.tail(total - uf1);
  if (kernel > 0) prob.Aeq.bottomRows(kernel) = blk.data_kernel.transpose();

  const Matrix Qbar = repeat_block(cfg.Q, np);
  const Matrix Rbar = repeat_block(cfg.R, np);
  tracking_cost(blk.Yf, Vector::Zero(blk.Yf.rows()), blk.Uf, Vector::Zero(blk.Uf.rows()),
                ref_window.col(), Qbar, Rbar, prob);
  if (cfg.reg > 0.0) prob.P.diagonal().array() += 2.0 * cfg.reg;

  const Box ub = repeat_box(cfg.u_box, np);
  const Box yb = repeat_box(cfg.y_box, np);
  prob.Ain.resize(blk.Uf.rows() + blk.Yf.rows(), blk.n_cols);
  prob.Ain << blk.Uf, blk.Yf;
  prob.lb.resize(prob.Ain.rows());
  prob.ub.resize(prob.Ain.rows());
  prob.lb << ub.lower, yb.lower;
  prob.ub << ub.upper, yb.upper;
  return prob;
}

AffinePrediction unroll_prediction(const LpvIoModel& model, const InitialWindow& past,
                                   const SignalSequence& p_hat) {
  const Index n0 = past.u.length();
  if (past.p.length() != n0 || past.y.length() != n0) {
    throw DimensionError("past windows must share one length");
  }
  if (n0 < model.lag()) {
    throw InitializationError("past window of length " + std::to_string(n0) +
                              " is shorter than the model lag " + std::to_string(model.lag()));
  }
  if (past.u.dim() != model.n_u() || past.y.dim() != model.n_y() ||
      past.p.dim() != model.n_p() || p_hat.dim() != model.n_p()) {
    throw DimensionError("past or future windows do not match the model dimensions");
  }
  const Index nu = model.n_u();
  const Index ny = model.n_y();
  const Index n = p_hat.length();

  AffinePrediction out;
  out.phi = Vector::Zero(n * ny);
  out.gamma = Matrix::Zero(n * ny, n * nu);
  // Sample j of the horizon is time k + j; negative j reads the past window.
  auto sched = [&](Index j) -> Vector { return j >= 0 ? p_hat.at(j + 1) : past.p.at(n0 + j + 1); };
  for (Index j = 0; j < n; ++j) {
    auto phi_j = out.phi.segment(j * ny, ny);
    auto gam_j = out.gamma.middleRows(j * ny, ny);
    for (Index i = 1; i <= model.n_a(); ++i) {
      const Index t = j - i;
      const Matrix a = model.a(i, sched(t));
      if (t >= 0) {
        phi_j -= a * out.phi.segment(t * ny, ny);
        gam_j -= a * out.gamma.middleRows(t * ny, ny);
      } else {
        phi_j -= a * past.y.at(n0 + t + 1);
      }
    }
    for (Index i = 1; i <= model.n_b(); ++i) {
      const Index t = j - i;
      const Matrix b = model.b(i, sched(t));
      if (t >= 0) {
        gam_j.middleCols(t * nu, nu) += b;
      } else {
        phi_j += b * past.u.at(n0 + t + 1);
      }
    }
  }
  return out;
}

QpProblem build_mpc_qp(const AffinePrediction& pred, const SignalSequence& ref_window,
                       const DpcConfig& cfg) {
  const Index ny = cfg.Q.rows();
  const Index nu = cfg.R.rows();
  const Index np = cfg.N_p;
  if (pred.phi.size() != np * ny || pred.gamma.cols() != np * nu) {
    throw DimensionError("prediction maps do not match horizon and weights");
  }
  check_sequence(ref_window, np, ny, "reference window");
  const Index n = np * nu;
  QpProblem prob;
  tracking_cost(pred.gamma, pred.phi, Matrix::Identity(n, n), Vector::Zero(n), ref_window.col(),
                repeat_block(cfg.Q, np), repeat_block(cfg.R, np), prob);
  prob.Aeq.resize(0, n);
  prob.beq.resize(0);
  const Box ub = repeat_box(cfg.u_box, np);
  const Box yb = repeat_box(cfg.y_box, np);
  prob.Ain.resize(n + np * ny, n);
  prob.Ain << Matrix::Identity(n, n), pred.gamma;
  prob.lb.resize(prob.Ain.rows());
  prob.ub.resize(prob.Ain.rows());
  prob.lb << ub.lower, yb.lower - pred.phi;
  prob.ub << ub.upper, yb.upper - pred.phi;
  return prob;
}

PredictiveController::PredictiveController(DpcConfig cfg, Index n_u, Index n_p, Index n_y)
    : cfg_(std::move(cfg)),
      n_u_(n_u),
      n_p_(n_p),
      n_y_(n_y),
      past_(InitialWindow::zeros(n_u, n_p, n_y, std::max<Index>(cfg_.n_ell, 1))) {
  cfg_.validate(n_u, n_y);
}

void PredictiveController::reset(const InitialWindow& init) {
  const Index n0 = init.u.length();
  if (init.p.length() != n0 || init.y.length() != n0) {
    throw InitializationError("initial windows must share one length");
  }
  if (n0 < cfg_.n_ell) {
    throw InitializationError("initial window of length " + std::to_string(n0) +
                              " is shorter than n_ell = " + std::to_string(cfg_.n_ell));
  }
  if (init.u.dim() != n_u_ || init.p.dim() != n_p_ || init.y.dim() != n_y_) {
    throw DimensionError("initial window dimensions do not match the controller");
  }
  const Index first = n0 - cfg_.n_ell + 1;
  past_.u = init.u.slice(first, cfg_.n_ell);
  past_.p = init.p.slice(first, cfg_.n_ell);
  past_.y = init.y.slice(first, cfg_.n_ell);
  steps_ = 0;
  warnings_.clear();
}

void PredictiveController::push(const Vector& u, const Vector& p, const Vector& y) {
  if (u.size() != n_u_ || p.size() != n_p_ || y.size() != n_y_) {
    throw DimensionError("measurement dimensions do not match the controller");
  }
  auto shift = [](SignalSequence& s, const Vector& v) {
    Matrix m = s.samples();
    const Index n = m.cols();
    if (n > 1) m.leftCols(n - 1) = m.rightCols(n - 1).eval();
    m.col(n - 1) = v;
    s = SignalSequence(std::move(m));
  };
  shift(past_.u, u);
  shift(past_.p, p);
  shift(past_.y, y);
}

SignalSequence PredictiveController::resolve_schedule(const SignalSequence& p_input) const {
  if (p_input.dim() != n_p_) {
    throw DimensionError("scheduling input has dimension " + std::to_string(p_input.dim()) +
                         ", expected " + std::to_string(n_p_));
  }
  if (cfg_.sched_policy == SchedulingPolicy::kFrozen) {
    return SignalSequence::constant(p_input.at(1), cfg_.N_p);
  }
  if (p_input.length() < cfg_.N_p) {
    throw DimensionError("known-future scheduling needs " + std::to_string(cfg_.N_p) +
                         " samples, got " + std::to_string(p_input.length()));
  }
  return p_input.slice(1, cfg_.N_p);
}

StepResult PredictiveController::solve(const SignalSequence& ref_window,
                                       const SignalSequence& p_input) {
  const SignalSequence p_hat = resolve_schedule(p_input);
  ++steps_;
  if (cfg_.p_set) {
    for (Index j = 1; j <= p_hat.length(); ++j) {
      if (!cfg_.p_set->contains(p_hat.at(j), 1e-12)) {
        warnings_.push_back("step " + std::to_string(steps_) +
                            ": scheduling outside the scheduling set");
        break;
      }
    }
  }
  const auto t0 = std::chrono::steady_clock::now();
  const QpProblem prob = build_qp(ref_window, p_hat);
  const QpSolution sol = lpvdpc::solve(prob, cfg_.qp);
  StepResult out;
  out.solve_ms = elapsed_ms(t0);
  out.status = sol.status;
  out.objective = sol.objective;
  out.iterations = sol.iterations;
  if (sol.status == QpStatus::kInfeasible) {
    throw InfeasibleStepError(name() + " step " + std::to_string(steps_) + ": QP infeasible",
                              steps_);
  }
  if (sol.status != QpStatus::kOptimal) {
    warnings_.push_back(name() + " step " + std::to_string(steps_) + ": degraded solve (" +
                        to_string(sol.status) + ", kkt " + std::to_string(sol.kkt.max()) + ")");
  }
  out.decision = sol.x;
  extract(sol, p_hat, out);
  out.u = out.u_plan.at(1);
  return out;
}

StepResult PredictiveController::step(const Vector& u_prev, const Vector& p_prev,
                                      const Vector& y_prev, const SignalSequence& ref_window,
                                      const SignalSequence& p_input) {
  push(u_prev, p_prev, y_prev);
  return solve(ref_window, p_input);
}

DpcController::DpcController(PredictorBlocks blocks, DpcConfig cfg)
    : PredictiveController(std::move(cfg), blocks.n_u, blocks.n_p, blocks.n_y),
      blocks_(std::move(blocks)) {
  if (blocks_.n_ell != cfg_.n_ell || blocks_.horizon != cfg_.N_p) {
    throw ConfigError("predictor blocks do not match n_ell / N_p of the configuration");
  }
}

DpcController::DpcController(const DataDictionary& dict, DpcConfig cfg, Index n_x)
    : DpcController(build_blocks(dict, cfg.n_ell, cfg.N_p, n_x), cfg) {}

QpProblem DpcController::build_qp(const SignalSequence& ref_window,
                                  const SignalSequence& p_hat) const {
  return build_dpc_qp(blocks_, past_, ref_window, p_hat, cfg_);
}

void DpcController::extract(const QpSolution& sol, const SignalSequence&, StepResult& out) const {
  out.u_plan = SignalSequence::from_stacked(blocks_.Uf * sol.x, n_u_);
  out.y_plan = SignalSequence::from_stacked(blocks_.Yf * sol.x, n_y_);
}

MpcController::MpcController(LpvIoModel model, DpcConfig cfg)
    : PredictiveController(std::move(cfg), model.n_u(), model.n_p(), model.n_y()),
      model_(std::move(model)) {
  if (cfg_.n_ell < model_.lag()) {
    throw ConfigError("n_ell must cover the model lag " + std::to_string(model_.lag()));
  }
}

MpcController::MpcController(LpvIoModel model, DpcConfig cfg, Index n_p, SchedulingLift lift)
    : PredictiveController(std::move(cfg), model.n_u(), n_p, model.n_y()),
      model_(std::move(model)),
      lift_(std::move(lift)) {
  if (cfg_.n_ell < model_.lag()) {
    throw ConfigError("n_ell must cover the model lag " + std::to_string(model_.lag()));
  }
  if (!lift_) throw ConfigError("scheduling lift is empty");
  if (lift_(Vector::Zero(n_p)).size() != model_.n_p()) {
    throw ConfigError("scheduling lift does not produce the model scheduling dimension");
  }
}

SignalSequence MpcController::lifted(const SignalSequence& p) const {
  if (!lift_) return p;
  Matrix m(model_.n_p(), p.length());
  for (Index j = 1; j <= p.length(); ++j) m.col(j - 1) = lift_(p.at(j));
  return SignalSequence(std::move(m));
}

AffinePrediction MpcController::prediction(const SignalSequence& p_hat) const {
  InitialWindow past{past_.u, lifted(past_.p), past_.y};
  return unroll_prediction(model_, past, lifted(p_hat));
}

QpProblem MpcController::build_qp(const SignalSequence& ref_window,
                                  const SignalSequence& p_hat) const {
  return build_mpc_qp(prediction(p_hat), ref_window, cfg_);
}

void MpcController::extract(const QpSolution& sol, const SignalSequence& p_hat,
                            StepResult& out) const {
  const AffinePrediction pred = prediction(p_hat);
  out.u_plan = SignalSequence::from_stacked(sol.x, n_u_);
  out.y_plan = SignalSequence::from_stacked(pred.phi + pred.gamma * sol.x, n_y_);
}

SignalSequence reference_window(const SignalSequence& r, Index k, Index horizon) {
  if (k < 1 || horizon < 1) throw DimensionError("reference window needs k >= 1 and horizon >= 1");
  Matrix m(r.dim(), horizon);
  for (Index j = 0; j < horizon; ++j) m.col(j) = r.at(std::min(k + j, r.length()));
  return SignalSequence(std::move(m));
}

TrajectoryLog closed_loop(const LoopPlant& plant, PredictiveController& ctrl,
                          const SignalSequence& reference, Index steps,
                          const InitialWindow& init) {
  if (steps < 1) throw DimensionError("closed loop needs at least one step");
  if (reference.dim() != ctrl.n_y()) throw DimensionError("reference dimension mismatch");
  const DpcConfig& cfg = ctrl.config();

  TrajectoryLog log;
  log.controller = ctrl.name();
  log.Q = cfg.Q;
  log.R = cfg.R;
  log.u_box = cfg.u_box;
  log.y_box = cfg.y_box;

  const auto* io = std::get_if<IoLoopPlant>(&plant);
  const auto* pend = std::get_if<PendulumLoopPlant>(&plant);
  InitialWindow hist = init;
  std::optional<PendulumPlant> pendulum;
  if (pend) {
    pendulum = pend->plant;
    if (ctrl.n_u() != 1 || ctrl.n_y() != 1 || ctrl.n_p() != 1) {
      throw DimensionError("the pendulum loop needs a SISO controller with scalar scheduling");
    }
  } else if (io->model.n_p() != ctrl.n_p() || io->model.n_u() != ctrl.n_u() ||
             io->model.n_y() != ctrl.n_y()) {
    throw DimensionError("plant and controller dimensions differ");
  }
  const double ts = io ? io->sample_time : pend->plant.params.T_s;

  Vector u_prev, p_prev, y_prev;
  Index k = 0;
  try {
    ctrl.reset(init);
    for (k = 1; k <= steps; ++k) {
      Vector y_k, p_k;
      SignalSequence p_input = SignalSequence::zeros(ctrl.n_p(), 1);
      if (io) {
        const Index lag = io->model.lag();
        const Index n0 = hist.u.length();
        const InitialWindow recent{hist.u.slice(n0 - lag + 1, lag), hist.p.slice(n0 - lag + 1, lag),
                                   hist.y.slice(n0 - lag + 1, lag)};
        y_k = simulate_io(io->model, SignalSequence::zeros(ctrl.n_u(), 1),
                          SignalSequence::zeros(ctrl.n_p(), 1), recent)
                  .at(1);
        p_k = io->scheduling(k);
        if (cfg.sched_policy == SchedulingPolicy::kKnownFuture) {
          Matrix pm(ctrl.n_p(), cfg.N_p);
          for (Index j = 0; j < cfg.N_p; ++j) pm.col(j) = io->scheduling(k + j);
          p_input = SignalSequence(std::move(pm));
        } else {
          p_input = SignalSequence(Matrix(p_k));
        }
      } else {
        y_k = Vector::Constant(1, pendulum->state.theta);
        p_k = Vector::Constant(1, pendulum_scheduling(pendulum->state.theta));
        p_input = SignalSequence(Matrix(p_k));
      }
      if (k > 1) ctrl.push(u_prev, p_prev, y_prev);
      const StepResult res = ctrl.solve(reference_window(reference, k, cfg.N_p), p_input);

      StepRecord rec;
      rec.k = k;
      rec.t = static_cast<double>(k - 1) * ts;
      rec.r = reference.at(std::min(k, reference.length()));
      rec.y = y_k;
      rec.u = res.u;
      rec.p = p_k;
      rec.status = res.status;
      rec.solve_ms = res.solve_ms;
      rec.objective = res.objective;
      log.records.push_back(std::move(rec));

      if (io) {
        hist.u = hist.u.append(SignalSequence(Matrix(res.u)));
        hist.p = hist.p.append(SignalSequence(Matrix(p_k)));
        hist.y = hist.y.append(SignalSequence(Matrix(y_k)));
      } else {
        pendulum = advance_sample(*pendulum, res.u(0), pend->substeps);
      }
      u_prev = res.u;
      p_prev = p_k;
      y_prev = y_k;
    }
  } catch (const Error& e) {
    log.warnings = ctrl.warnings();
    throw ClosedLoopAbort(std::string("closed loop aborted at step ") + std::to_string(k) + ": " +
                              e.what(),
                          std::move(log), static_cast<long>(k), std::current_exception());
  }
  log.warnings = ctrl.warnings();
  return log;
}

TrackingMetrics tracking_metrics(const TrajectoryLog& log) {
  if (log.records.empty()) throw DimensionError("tracking metrics of an empty log");
  TrackingMetrics m;
  double sq = 0.0;
  for (const StepRecord& rec : log.records) {
    const Vector e = rec.y - rec.r;
    sq += e.squaredNorm();
    m.total_cost += e.dot(log.Q * e) + rec.u.dot(log.R * rec.u);
    m.max_violation_u = std::max(m.max_violation_u, log.u_box.violation(rec.u));
    m.max_violation_y = std::max(m.max_violation_y, log.y_box.violation(rec.y));
  }
  m.rmse = std::sqrt(sq / static_cast<double>(log.records.size()));
  return m;
}

}  // namespace lpvdpc
