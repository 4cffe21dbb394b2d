#include "lpvdpc/predictor.hpp"

#include "lpvdpc/errors.hpp"

#include <cmath>
#include <string>

namespace lpvdpc {

PredictorBlocks build_blocks(const DataDictionary& dict, Index n_ell, Index horizon, Index n_x) {
  const PeCertificate& cert = dict.certificate();
  if (!cert.passed) {
    throw UncertifiedDictionaryError("dictionary has no passing persistency-of-excitation "
                                     "certificate (rank " +
                                     std::to_string(cert.rank) + " of " +
                                     std::to_string(cert.required_rank) + ")");
  }
  if (cert.order < n_x + horizon) {
    throw UncertifiedDictionaryError("dictionary is certified up to order " +
                                     std::to_string(cert.order) + " but order " +
                                     std::to_string(n_x + horizon) + " is required");
  }
  if (n_ell < 1 || horizon < 1 || n_ell + horizon > dict.length()) {
    throw InvalidDepthError("n_ell + L = " + std::to_string(n_ell + horizon) +
                            " exceeds dictionary length " + std::to_string(dict.length()));
  }

  PredictorBlocks blk;
  blk.n_ell = n_ell;
  blk.horizon = horizon;
  blk.n_u = dict.n_u();
  blk.n_y = dict.n_y();
  blk.n_p = dict.n_p();
  blk.n_cols = dict.length() - (n_ell + horizon) + 1;

  auto split = [&](const SignalSequence& s, Matrix& past, Matrix& future) {
    HankelSplit hs = hankel_split(s, n_ell, horizon);
    past = std::move(hs.past.entries);
    future = std::move(hs.future.entries);
  };
  split(dict.u(), blk.Up, blk.Uf);
  split(dict.u_lifted(), blk.Upp, blk.Ufp);
  split(dict.y(), blk.Yp, blk.Yf);
  split(dict.y_lifted(), blk.Ypp, blk.Yfp);

  Matrix stacked(blk.Up.rows() + blk.Upp.rows() + blk.Yp.rows() + blk.Ypp.rows() + blk.Uf.rows() +
                     blk.Ufp.rows() + blk.Yf.rows() + blk.Yfp.rows(),
                 blk.n_cols);
  stacked << blk.Up, blk.Upp, blk.Yp, blk.Ypp, blk.Uf, blk.Ufp, blk.Yf, blk.Yfp;
  Eigen::BDCSVD<Matrix> svd(stacked, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double cutoff =
      sv.size() > 0 ? default_rank_tolerance(stacked.rows(), stacked.cols()) * sv(0) : 0.0;
  blk.data_rank = static_cast<Index>((sv.array() > cutoff).count());
  blk.data_kernel = svd.matrixV().rightCols(blk.n_cols - blk.data_rank);
  return blk;
}

PredictorBlocks build_blocks(const DataDictionary& dict, Index n_ell, Index horizon) {
  return build_blocks(dict, n_ell, horizon, n_ell);
}

EqualitySystem assemble_equality(const PredictorBlocks& blk, const PredictionWindows& w) {
  const Index nl = blk.n_ell;
  const Index hl = blk.horizon;
  auto check = [](const SignalSequence& s, Index len, Index dim, const char* name) {
    if (s.length() != len || s.dim() != dim) {
      throw DimensionError(std::string(name) + " window must be " + std::to_string(len) +
                           " samples of dimension " + std::to_string(dim) + ", got " +
                           std::to_string(s.length()) + " x " + std::to_string(s.dim()));
    }
  };
  check(w.past_u, nl, blk.n_u, "past input");
  check(w.past_p, nl, blk.n_p, "past scheduling");
  check(w.past_y, nl, blk.n_y, "past output");
  check(w.future_u, hl, blk.n_u, "future input");
  check(w.future_p, hl, blk.n_p, "future scheduling");

  const Matrix pbar_u = blockdiag_kron(w.past_p, blk.n_u);
  const Matrix pbar_y = blockdiag_kron(w.past_p, blk.n_y);
  const Matrix phat_u = blockdiag_kron(w.future_p, blk.n_u);
  const Matrix phat_y = blockdiag_kron(w.future_p, blk.n_y);

  const std::array<Index, 7> sizes = {blk.Up.rows(), blk.Upp.rows(), blk.Yp.rows(),
                                      blk.Ypp.rows(), blk.Uf.rows(), blk.Ufp.rows(),
                                      blk.Yfp.rows()};
  EqualitySystem sys;
  sys.offsets[0] = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) sys.offsets[i + 1] = sys.offsets[i] + sizes[i];
  const Index rows = sys.offsets[7];

  sys.A.resize(rows, blk.n_cols);
  sys.A << blk.Up, blk.Upp - pbar_u * blk.Up, blk.Yp, blk.Ypp - pbar_y * blk.Yp, blk.Uf,
      blk.Ufp - phat_u * blk.Uf, blk.Yfp - phat_y * blk.Yf;

  sys.b = Vector::Zero(rows);
  sys.b.segment(sys.offsets[0], sizes[0]) = w.past_u.col();
  sys.b.segment(sys.offsets[2], sizes[2]) = w.past_y.col();
  sys.b.segment(sys.offsets[4], sizes[4]) = w.future_u.col();
  return sys;
}

double consistency_tolerance(const Vector& b) { return 1e-6 * (1.0 + b.norm()); }

GSolution solve_g(const Matrix& A, const Vector& b, double reg, double tol) {
  if (A.rows() != b.size()) throw DimensionError("solve_g: A and b have different row counts");
  if (reg < 0.0) throw DimensionError("solve_g: regularization must be nonnegative");
  GSolution sol;
  if (reg == 0.0) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod;
    cod.setThreshold(default_rank_tolerance(A.rows(), A.cols()));
    cod.compute(A);
    sol.g = cod.solve(b);
  } else {
    Matrix aug(A.rows() + A.cols(), A.cols());
    aug << A, std::sqrt(reg) * Matrix::Identity(A.cols(), A.cols());
    Vector rhs = Vector::Zero(aug.rows());
    rhs.head(b.size()) = b;
    sol.g = aug.colPivHouseholderQr().solve(rhs);
  }
  sol.residual = (A * sol.g - b).norm();
  const double limit = tol < 0.0 ? consistency_tolerance(b) : tol;
  if (!(sol.residual <= limit)) {
    throw InconsistentTrajectoryError(
        "windows are not a trajectory of the data-generating system: residual " +
            std::to_string(sol.residual) + " exceeds " + std::to_string(limit),
        sol.residual);
  }
  return sol;
}

PredictorSolution predict(const PredictorBlocks& blocks, const PredictionWindows& w, double reg) {
  const EqualitySystem sys = assemble_equality(blocks, w);
  GSolution gs = solve_g(sys.A, sys.b, reg);
  Vector yhat = blocks.Yf * gs.g;
  return {std::move(gs.g), gs.residual, SignalSequence::from_stacked(yhat, blocks.n_y)};
}

SignalSequence dd_simulate(const PredictorBlocks& blocks, const PredictionWindows& w) {
  return predict(blocks, w).predicted_y;
}

}  // namespace lpvdpc
