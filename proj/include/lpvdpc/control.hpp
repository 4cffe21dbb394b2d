#pragma once

/// \file control.hpp
/// \brief Receding-horizon reference tracking: the data-driven controller
/// built on PredictorBlocks, the model-based baseline obtained by unrolling the
/// input-output recursion, and the closed-loop runner.
///
/// Timing convention: at step k the controller holds the past window
/// (u, p, y) at k - n_ell, ..., k - 1 and plans u_k, ..., u_{k+N_p-1}; the
/// predicted outputs cover y_k, ..., y_{k+N_p-1}.

#include "lpvdpc/errors.hpp"
#include "lpvdpc/plantlab.hpp"
#include "lpvdpc/predictor.hpp"
#include "lpvdpc/qpcore.hpp"
#include "lpvdpc/signals.hpp"

#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace lpvdpc {

/// How the future scheduling p_hat over the horizon is obtained.
enum class SchedulingPolicy {
  /// Caller supplies p_k, ..., p_{k+N_p-1}.
  kKnownFuture,
  /// p_hat is the current p_k held over the horizon.
  kFrozen,
};

std::string to_string(SchedulingPolicy policy);

struct DpcConfig {
  Index N_p = 5;
  Index n_ell = 2;
  Matrix Q;
  Matrix R;
  Box u_box;
  Box y_box;
  std::optional<Box> p_set;
  SchedulingPolicy sched_policy = SchedulingPolicy::kKnownFuture;
  double reg = 0.0;
  /// Adds N' g = 0 for a basis N of the kernel of the stacked data matrix, so
  /// that g carries no component that leaves every represented trajectory
  /// unchanged. Without it, an inexact dictionary leaves those directions to
  /// the regularization alone.
  bool data_range_restriction = true;
  QpSettings qp;

  /// \throws ConfigError on non-PSD weights, empty boxes, or nonpositive
  ///         horizon / window length, or dimension mismatch with (n_u, n_y).
  void validate(Index n_u, Index n_y) const;
};

/// Block-diagonal repetition I_N (x) W.
Matrix repeat_block(const Matrix& w, Index count);

/// Stacks a box `count` times: bounds for col(x_0, ..., x_{count-1}).
Box repeat_box(const Box& box, Index count);

/// QP in g for one receding-horizon step. Equalities: the predictor rows
/// without the future-input block (u_hat = Uf g is definitional), plus the
/// optional data-range rows. Inequalities: [Uf; Yf] g within the stacked
/// input and output boxes.
/// \throws DimensionError on window or weight mismatch.
QpProblem build_dpc_qp(const PredictorBlocks& blocks, const InitialWindow& past,
                       const SignalSequence& ref_window, const SignalSequence& p_hat,
                       const DpcConfig& cfg);

/// Affine output prediction col(y_hat) = phi + gamma col(u_hat) over N steps.
struct AffinePrediction {
  Vector phi;
  Matrix gamma;
};

/// Unrolls the recursion from the past window (model scheduling vectors,
/// oldest first; length >= model lag) with future scheduling p_hat.
AffinePrediction unroll_prediction(const LpvIoModel& model, const InitialWindow& past,
                                   const SignalSequence& p_hat);

/// QP in u_hat with the same stage cost and boxes as the data-driven one.
QpProblem build_mpc_qp(const AffinePrediction& pred, const SignalSequence& ref_window,
                       const DpcConfig& cfg);

struct StepResult {
  /// Applied input u_k (first planned input).
  Vector u;
  SignalSequence u_plan = SignalSequence::zeros(0, 1);
  SignalSequence y_plan = SignalSequence::zeros(0, 1);
  /// Decision vector of the QP (g or u_hat).
  Vector decision;
  QpStatus status = QpStatus::kMaxIterations;
  double objective = 0.0;
  int iterations = 0;
  double solve_ms = 0.0;
};

/// Shared rolling past buffer, scheduling policy handling and QP solve.
/// Single-threaded: an instance owns its buffer.
class PredictiveController {
 public:
  PredictiveController(DpcConfig cfg, Index n_u, Index n_p, Index n_y);
  virtual ~PredictiveController() = default;

  /// Loads the newest n_ell records of `init`.
  /// \throws InitializationError when init is shorter than n_ell.
  void reset(const InitialWindow& init);

  /// Appends the record (u, p, y) and drops the oldest one.
  void push(const Vector& u, const Vector& p, const Vector& y);

  /// Resolves p_hat from `p_input` (N_p samples under known-future, the
  /// current p_k under frozen), solves the QP and returns the plan.
  /// \throws InfeasibleStepError carrying the controller's step index.
  StepResult solve(const SignalSequence& ref_window, const SignalSequence& p_input);

  /// push(u_prev, p_prev, y_prev) followed by solve().
  StepResult step(const Vector& u_prev, const Vector& p_prev, const Vector& y_prev,
                  const SignalSequence& ref_window, const SignalSequence& p_input);

  SignalSequence resolve_schedule(const SignalSequence& p_input) const;

  const InitialWindow& past() const { return past_; }
  const DpcConfig& config() const { return cfg_; }
  Index n_u() const { return n_u_; }
  Index n_p() const { return n_p_; }
  Index n_y() const { return n_y_; }
  /// Number of solve() calls so far.
  long steps_taken() const { return steps_; }
  /// Degraded-solve messages (non-optimal QP status).
  const std::vector<std::string>& warnings() const { return warnings_; }

  virtual std::string name() const = 0;
  /// QP for the current buffer.
  virtual QpProblem build_qp(const SignalSequence& ref_window,
                             const SignalSequence& p_hat) const = 0;

 protected:
  /// Fills u_plan / y_plan from the QP solution.
  virtual void extract(const QpSolution& sol, const SignalSequence& p_hat,
                       StepResult& out) const = 0;

  DpcConfig cfg_;
  Index n_u_;
  Index n_p_;
  Index n_y_;
  InitialWindow past_;

 private:
  long steps_ = 0;
  std::vector<std::string> warnings_;
};

class DpcController : public PredictiveController {
 public:
  /// Blocks must have been built with n_ell = cfg.n_ell and L = cfg.N_p.
  DpcController(PredictorBlocks blocks, DpcConfig cfg);
  /// Builds the blocks from a certified dictionary (order n_x + N_p).
  DpcController(const DataDictionary& dict, DpcConfig cfg, Index n_x);

  std::string name() const override { return "dpc"; }
  QpProblem build_qp(const SignalSequence& ref_window, const SignalSequence& p_hat) const override;
  const PredictorBlocks& blocks() const { return blocks_; }

 protected:
  void extract(const QpSolution& sol, const SignalSequence& p_hat,
               StepResult& out) const override;

 private:
  PredictorBlocks blocks_;
};

/// Maps a measured scheduling sample to the model's scheduling vector.
using SchedulingLift = std::function<Vector(const Vector&)>;

class MpcController : public PredictiveController {
 public:
  /// Model scheduling equals the measured scheduling.
  MpcController(LpvIoModel model, DpcConfig cfg);
  /// Measured scheduling of dimension n_p is mapped through `lift` before it
  /// enters the model.
  MpcController(LpvIoModel model, DpcConfig cfg, Index n_p, SchedulingLift lift);

  std::string name() const override { return "mpc"; }
  QpProblem build_qp(const SignalSequence& ref_window, const SignalSequence& p_hat) const override;
  AffinePrediction prediction(const SignalSequence& p_hat) const;
  const LpvIoModel& model() const { return model_; }

 protected:
  void extract(const QpSolution& sol, const SignalSequence& p_hat,
               StepResult& out) const override;

 private:
  SignalSequence lifted(const SignalSequence& p) const;

  LpvIoModel model_;
  SchedulingLift lift_;
};

/// One closed-loop record.
struct StepRecord {
  Index k = 0;
  double t = 0.0;
  Vector r;
  Vector y;
  Vector u;
  Vector p;
  QpStatus status = QpStatus::kOptimal;
  double solve_ms = 0.0;
  double objective = 0.0;
};

struct TrajectoryLog {
  std::string controller;
  Matrix Q;
  Matrix R;
  Box u_box;
  Box y_box;
  std::vector<StepRecord> records;
  std::vector<std::string> warnings;

  Index size() const { return static_cast<Index>(records.size()); }
};

/// LPV-IO plant with exogenous scheduling p_k = scheduling(k) (model
/// scheduling vector).
struct IoLoopPlant {
  LpvIoModel model;
  std::function<Vector(Index)> scheduling;
  double sample_time = 1.0;
};

/// Pendulum under zero-order hold; p_k = sinc(theta_k), y_k = theta_k.
struct PendulumLoopPlant {
  PendulumPlant plant;
  int substeps = 4;
};

using LoopPlant = std::variant<IoLoopPlant, PendulumLoopPlant>;

/// Raised by closed_loop when a step fails; keeps the records written so far.
class ClosedLoopAbort : public Error {
 public:
  ClosedLoopAbort(const std::string& what, TrajectoryLog partial, long step,
                  std::exception_ptr cause)
      : Error(what), partial_(std::move(partial)), step_(step), cause_(std::move(cause)) {}

  const TrajectoryLog& partial() const { return partial_; }
  long step() const { return step_; }
  std::exception_ptr cause() const { return cause_; }

 private:
  TrajectoryLog partial_;
  long step_;
  std::exception_ptr cause_;
};

/// Reference window r_k, ..., r_{k+N-1} (1-based k); the last sample of r is
/// held beyond its end.
SignalSequence reference_window(const SignalSequence& r, Index k, Index horizon);

/// Runs `steps` receding-horizon steps: measure y_k and p_k, hand the
/// previous record to the controller, solve, log, apply u_k. `init` holds
/// the records before time 1 and, for the pendulum, the initial state in
/// plant.state is used as-is.
/// \throws ClosedLoopAbort wrapping any controller or plant error.
TrajectoryLog closed_loop(const LoopPlant& plant, PredictiveController& ctrl,
                          const SignalSequence& reference, Index steps,
                          const InitialWindow& init);

struct TrackingMetrics {
  double rmse = 0.0;
  double max_violation_u = 0.0;
  double max_violation_y = 0.0;
  double total_cost = 0.0;
};

/// \throws DimensionError on an empty log.
TrackingMetrics tracking_metrics(const TrajectoryLog& log);

}  // namespace lpvdpc
