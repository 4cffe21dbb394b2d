#pragma once

/// \file predictor.hpp
/// \brief Data-driven LPV predictor.
///
/// A single recorded trajectory (u, p, y) spans every trajectory of the
/// lifted LTI system whose free signals are u, p (x) u and p (x) y. Fixing an
/// initial window of length n_ell and imposing the Kronecker structure
/// p (x) s on both the initial and the future segment selects exactly the
/// LPV trajectories, so the predicted output is Yf g for any g solving
///
///   [ Up              ]       [ col(u_past) ]
///   [ Upp - Pbar_u Up ]       [ 0           ]
///   [ Yp              ]       [ col(y_past) ]
///   [ Ypp - Pbar_y Yp ]  g =  [ 0           ]
///   [ Uf              ]       [ col(u_fut)  ]
///   [ Ufp - Phat_u Uf ]       [ 0           ]
///   [ Yfp - Phat_y Yf ]       [ 0           ]
///
/// where Pbar / Phat are blockdiag_kron of the past / future scheduling.

#include "lpvdpc/plantlab.hpp"
#include "lpvdpc/signals.hpp"

#include <array>

namespace lpvdpc {

/// Past (depth n_ell) and future (depth L) Hankel blocks of u, u^p, y, y^p.
struct PredictorBlocks {
  Index n_ell = 0;
  Index horizon = 0;
  Index n_u = 0;
  Index n_y = 0;
  Index n_p = 0;
  Index n_cols = 0;

  Matrix Up, Upp, Yp, Ypp;
  Matrix Uf, Ufp, Yf, Yfp;

  /// Numerical rank of the stacked data matrix [Up; Upp; Yp; Ypp; Uf; Ufp; Yf; Yfp].
  Index data_rank = 0;
  /// Orthonormal basis of the numerical kernel of that stacked matrix
  /// (n_cols x (n_cols - data_rank)). Components of g along it do not change
  /// any represented trajectory.
  Matrix data_kernel;
};

/// Splits the dictionary into predictor blocks.
/// \throws UncertifiedDictionaryError unless the PE certificate passed at an
///         order of at least n_x + L.
/// \throws InvalidDepthError when n_ell + L exceeds the dictionary length.
PredictorBlocks build_blocks(const DataDictionary& dict, Index n_ell, Index horizon, Index n_x);
/// Same, with n_x = n_ell.
PredictorBlocks build_blocks(const DataDictionary& dict, Index n_ell, Index horizon);

/// Past and future signal windows handed to the predictor.
struct PredictionWindows {
  SignalSequence past_u;
  SignalSequence past_p;
  SignalSequence past_y;
  SignalSequence future_u;
  SignalSequence future_p;
};

struct EqualitySystem {
  Matrix A;
  Vector b;

  /// Row offsets of the seven groups, in stacking order, plus the total.
  std::array<Index, 8> offsets{};
};

/// Row groups of EqualitySystem, in stacking order.
enum class RowGroup : int {
  kPastInput = 0,
  kPastInputLift,
  kPastOutput,
  kPastOutputLift,
  kFutureInput,
  kFutureInputLift,
  kFutureOutputLift,
};

/// Stacks the linear system for g shown in the file comment.
/// \throws DimensionError on window length or dimension mismatch.
EqualitySystem assemble_equality(const PredictorBlocks& blocks, const PredictionWindows& w);

struct GSolution {
  Vector g;
  double residual = 0.0;
};

/// Default consistency threshold 1e-6 (1 + ||b||).
double consistency_tolerance(const Vector& b);

/// Minimum-norm least-squares solution of A g = b through a complete
/// orthogonal decomposition; with reg > 0, minimizes ||A g - b||^2 + reg ||g||^2.
/// \throws InconsistentTrajectoryError when ||A g - b|| exceeds `tol`
///         (negative tol selects consistency_tolerance(b)).
GSolution solve_g(const Matrix& A, const Vector& b, double reg = 0.0, double tol = -1.0);

struct PredictorSolution {
  Vector g;
  double residual = 0.0;
  SignalSequence predicted_y;
};

/// Full prediction: g and Yf g reshaped into L output samples.
PredictorSolution predict(const PredictorBlocks& blocks, const PredictionWindows& w,
                          double reg = 0.0);

/// Data-driven simulation: the L future outputs of the unknown system.
SignalSequence dd_simulate(const PredictorBlocks& blocks, const PredictionWindows& w);

}  // namespace lpvdpc
