#include "lpvdpc/signals.hpp"

#include "lpvdpc/errors.hpp"

#include <algorithm>
#include <string>

namespace lpvdpc {

SignalSequence::SignalSequence(Matrix samples) : samples_(std::move(samples)) {
  if (samples_.cols() < 1) {
    throw DimensionError("signal sequence must hold at least one sample");
  }
  if (!samples_.allFinite()) {
    throw DimensionError("signal sequence entries must be finite");
  }
}

SignalSequence SignalSequence::from_scalars(std::span<const double> values) {
  Matrix m(1, static_cast<Index>(values.size()));
  for (Index k = 0; k < m.cols(); ++k) m(0, k) = values[static_cast<std::size_t>(k)];
  return SignalSequence(std::move(m));
}

SignalSequence SignalSequence::constant(const Vector& value, Index length) {
  return SignalSequence(value.replicate(1, length));
}

SignalSequence SignalSequence::zeros(Index dim, Index length) {
  return SignalSequence(Matrix::Zero(dim, length));
}

SignalSequence SignalSequence::from_stacked(const Vector& stacked, Index dim) {
  if (dim < 1 || stacked.size() % dim != 0) {
    throw DimensionError("stacked vector of size " + std::to_string(stacked.size()) +
                         " is not a multiple of dimension " + std::to_string(dim));
  }
  return SignalSequence(stacked.reshaped(dim, stacked.size() / dim));
}

Vector SignalSequence::at(Index k) const {
  if (k < 1 || k > length()) {
    throw DimensionError("time index " + std::to_string(k) + " outside [1, " +
                         std::to_string(length()) + "]");
  }
  return samples_.col(k - 1);
}

double SignalSequence::value(Index k, Index i) const {
  if (i < 1 || i > dim()) throw DimensionError("channel index out of range");
  return at(k)(i - 1);
}

Vector SignalSequence::col() const { return samples_.reshaped(); }

SignalSequence SignalSequence::slice(Index first, Index count) const {
  if (first < 1 || count < 1 || first + count - 1 > length()) {
    throw DimensionError("slice [" + std::to_string(first) + ", +" + std::to_string(count) +
                         ") outside sequence of length " + std::to_string(length()));
  }
  return SignalSequence(samples_.middleCols(first - 1, count));
}

SignalSequence SignalSequence::append(const SignalSequence& tail) const {
  if (tail.dim() != dim()) throw DimensionError("cannot append sequences of different dimension");
  Matrix m(dim(), length() + tail.length());
  m << samples_, tail.samples_;
  return SignalSequence(std::move(m));
}

HankelMatrix hankel(const SignalSequence& seq, Index depth) {
  const Index n = seq.length();
  if (depth < 1 || depth > n) {
    throw InvalidDepthError("Hankel depth " + std::to_string(depth) + " outside [1, " +
                            std::to_string(n) + "]");
  }
  const Index ns = seq.dim();
  const Index cols = n - depth + 1;
  HankelMatrix h;
  h.depth = depth;
  h.source_dim = ns;
  h.entries.resize(ns * depth, cols);
  for (Index i = 0; i < depth; ++i) {
    h.entries.middleRows(i * ns, ns) = seq.samples().middleCols(i, cols);
  }
  return h;
}

HankelSplit hankel_split(const SignalSequence& seq, Index n_ell, Index horizon) {
  if (n_ell < 1 || horizon < 1 || n_ell + horizon > seq.length()) {
    throw InvalidDepthError("split depth " + std::to_string(n_ell) + " + " +
                            std::to_string(horizon) + " exceeds sequence length " +
                            std::to_string(seq.length()));
  }
  const HankelMatrix full = hankel(seq, n_ell + horizon);
  const Index ns = seq.dim();
  HankelSplit split;
  split.past = {full.entries.topRows(n_ell * ns), n_ell, ns};
  split.future = {full.entries.bottomRows(horizon * ns), horizon, ns};
  return split;
}

SignalSequence kron_lift(const SignalSequence& p, const SignalSequence& s) {
  if (p.length() != s.length()) {
    throw DimensionError("kron_lift: scheduling length " + std::to_string(p.length()) +
                         " differs from signal length " + std::to_string(s.length()));
  }
  const Index np = p.dim();
  const Index ns = s.dim();
  Matrix out(np * ns, s.length());
  for (Index k = 0; k < s.length(); ++k) {
    for (Index j = 0; j < np; ++j) {
      out.col(k).segment(j * ns, ns) = p.samples()(j, k) * s.samples().col(k);
    }
  }
  return SignalSequence(std::move(out));
}

Matrix blockdiag_kron(const SignalSequence& p, Index n) {
  const Index np = p.dim();
  const Index len = p.length();
  Matrix out = Matrix::Zero(np * n * len, n * len);
  for (Index k = 0; k < len; ++k) {
    for (Index j = 0; j < np; ++j) {
      out.block(k * np * n + j * n, k * n, n, n).diagonal().setConstant(p.samples()(j, k));
    }
  }
  return out;
}

SignalSequence aux_io(const SignalSequence& s, const SignalSequence& p) {
  const SignalSequence lifted = kron_lift(p, s);
  Matrix out(s.dim() + lifted.dim(), s.length());
  out << s.samples(), lifted.samples();
  return SignalSequence(std::move(out));
}

double default_rank_tolerance(Index rows, Index cols) {
  return 1e-9 * static_cast<double>(std::max(rows, cols));
}

Index numerical_rank(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return 0;
  const Vector sv = Eigen::BDCSVD<Matrix>(m).singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  const double cutoff = rel_tol * sv(0);
  return static_cast<Index>((sv.array() > cutoff).count());
}

PeResult persistency_of_excitation(const SignalSequence& seq, Index order, double rank_tol) {
  const HankelMatrix h = hankel(seq, order);
  PeResult res;
  res.order = order;
  res.required_rank = seq.dim() * order;
  res.rank = numerical_rank(h.entries, rank_tol);
  res.is_pe = res.rank == res.required_rank;
  return res;
}

PeResult persistency_of_excitation(const SignalSequence& seq, Index order) {
  const Index rows = seq.dim() * order;
  const Index cols = seq.length() - order + 1;
  return persistency_of_excitation(seq, order, default_rank_tolerance(rows, cols));
}

Index min_dictionary_length(Index n_u, Index n_p, Index n_x, Index horizon) {
  return ((n_p + 1) * n_u + 1) * (n_x + horizon) - 1;
}

Index spanning_dictionary_length(Index n_u, Index n_y, Index n_p, Index n_x, Index n_ell,
                                 Index horizon) {
  const Index free_channels = (n_p + 1) * n_u + n_p * n_y;
  const Index depth = n_ell + horizon;
  return (free_channels + 1) * depth + n_x - 1;
}

}  // namespace lpvdpc
