#pragma once

/// \file signals.hpp
/// \brief Sampled signal containers and the data-matrix constructions built on them:
/// Hankel matrices, Kronecker lifting with a scheduling signal, and the
/// persistency-of-excitation rank test.

#include <Eigen/Dense>

#include <span>

namespace lpvdpc {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Finite, uniformly sampled sequence s_1, ..., s_N of vectors in R^{n_s}.
///
/// Samples are stored column-wise: column k-1 holds s_k. Time indices in the
/// public interface are 1-based. A sequence is immutable once constructed.
///
/// A dimension of zero is accepted so that the scheduling signal of an LTI
/// system (n_p = 0) and its lifted products can be carried by the same type.
class SignalSequence {
 public:
  /// \throws DimensionError on zero length or non-finite entries.
  explicit SignalSequence(Matrix samples);

  static SignalSequence from_scalars(std::span<const double> values);
  static SignalSequence constant(const Vector& value, Index length);
  static SignalSequence zeros(Index dim, Index length);
  /// Inverse of col(): splits a stacked vector into `dim`-sized samples.
  static SignalSequence from_stacked(const Vector& stacked, Index dim);

  Index dim() const { return samples_.rows(); }
  Index length() const { return samples_.cols(); }

  /// Sample s_k, 1 <= k <= length().
  Vector at(Index k) const;
  /// Entry [s_k]_i with both indices 1-based.
  double value(Index k, Index i) const;

  const Matrix& samples() const { return samples_; }

  /// Column vectorization [s_1; s_2; ...; s_N].
  Vector col() const;

  /// Samples first, ..., first+count-1 (1-based).
  SignalSequence slice(Index first, Index count) const;

  /// Concatenation in time of two sequences of equal dimension.
  SignalSequence append(const SignalSequence& tail) const;

 private:
  Matrix samples_;
};

/// Block Hankel matrix of depth L built from a sequence.
struct HankelMatrix {
  Matrix entries;
  Index depth = 0;
  Index source_dim = 0;

  Index block_rows() const { return depth; }
  Index cols() const { return entries.cols(); }
};

struct HankelSplit {
  HankelMatrix past;
  HankelMatrix future;
};

struct PeResult {
  bool is_pe = false;
  Index rank = 0;
  Index required_rank = 0;
  Index order = 0;
};

/// Depth-L Hankel matrix, shape (n_s L) x (N - L + 1).
/// \throws InvalidDepthError unless 1 <= L <= N.
HankelMatrix hankel(const SignalSequence& seq, Index depth);

/// Rows of hankel(seq, n_ell + L) split into the first n_ell block rows and
/// the last L block rows.
HankelSplit hankel_split(const SignalSequence& seq, Index n_ell, Index horizon);

/// Sequence of Kronecker products p_k (x) s_k, dimension n_p n_s.
SignalSequence kron_lift(const SignalSequence& p, const SignalSequence& s);

/// Block-diagonal matrix with k-th block p_k (x) I_n, shape (n_p n N) x (N n).
Matrix blockdiag_kron(const SignalSequence& p, Index n);

/// Auxiliary signal [s_k; p_k (x) s_k], dimension (n_p + 1) n_s.
SignalSequence aux_io(const SignalSequence& s, const SignalSequence& p);

/// Relative singular-value cutoff used for every rank decision:
/// 1e-9 * max(rows, cols).
double default_rank_tolerance(Index rows, Index cols);

/// Number of singular values above rel_tol * sigma_max.
Index numerical_rank(const Matrix& m, double rel_tol);

/// Rank test of hankel(seq, L): is_pe iff the rank equals n_s L.
PeResult persistency_of_excitation(const SignalSequence& seq, Index order, double rank_tol);
PeResult persistency_of_excitation(const SignalSequence& seq, Index order);

/// ((n_p + 1) n_u + 1)(n_x + N_p) - 1: the shortest dictionary for which the
/// auxiliary input can be persistently exciting of order n_x + N_p.
Index min_dictionary_length(Index n_u, Index n_p, Index n_x, Index horizon);

/// Shortest dictionary whose depth-(n_ell + L) Hankel matrix of (u, u^p, y, y^p)
/// can span every length-(n_ell + L) trajectory of the lifted LTI system. The
/// free signals of that system are u, p (x) u and p (x) y, so this is the
/// fundamental-lemma count with (n_p + 1) n_u + n_p n_y free channels.
Index spanning_dictionary_length(Index n_u, Index n_y, Index n_p, Index n_x, Index n_ell,
                                 Index horizon);

}  // namespace lpvdpc
