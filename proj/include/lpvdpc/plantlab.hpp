#pragma once

/// \file plantlab.hpp
/// \brief Ground-truth systems used to generate data and to close the loop:
/// the affine LPV input-output recursion, the unbalanced-disc pendulum, and
/// seeded excitation signals for recording data dictionaries.

#include "lpvdpc/signals.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace lpvdpc {

/// Warnings collected during simulation instead of aborting it.
struct Diagnostics {
  std::vector<std::string> warnings;
};

/// Axis-aligned box {x : lower <= x <= upper}; infinite bounds allowed.
struct Box {
  Vector lower;
  Vector upper;

  static Box symmetric(Index dim, double half_width);
  static Box interval(double lower, double upper);
  static Box unbounded(Index dim);
  bool contains(const Vector& x, double slack = 0.0) const;
  /// Largest amount by which x leaves the box, 0 when inside.
  double violation(const Vector& x) const;
};

/// Affine-in-scheduling input-output recursion
///
///   y_k + sum_{i=1}^{n_a} a_i(p_{k-i}) y_{k-i} = sum_{i=1}^{n_b} b_i(p_{k-i}) u_{k-i},
///   a_i(p) = sum_{j=0}^{n_p} a_{i,j} [p]_j,  [p]_0 = 1.
///
/// Coefficient i is stored as one block row [a_{i,0} a_{i,1} ... a_{i,n_p}]
/// of shape n_y x (n_p + 1) n_y (inputs: n_y x (n_p + 1) n_u).
class LpvIoModel {
 public:
  LpvIoModel(Index n_u, Index n_y, Index n_p, std::vector<Matrix> a_blocks,
             std::vector<Matrix> b_blocks);

  Index n_u() const { return n_u_; }
  Index n_y() const { return n_y_; }
  Index n_p() const { return n_p_; }
  Index n_a() const { return static_cast<Index>(a_.size()); }
  Index n_b() const { return static_cast<Index>(b_.size()); }
  Index order() const { return std::max(n_a(), n_b()); }
  Index lag() const { return std::max(n_a(), n_b()); }

  /// a_i(p), 1 <= i <= n_a.
  Matrix a(Index i, const Vector& p) const;
  /// b_i(p), 1 <= i <= n_b.
  Matrix b(Index i, const Vector& p) const;

  const Matrix& a_block(Index i) const { return a_.at(static_cast<std::size_t>(i - 1)); }
  const Matrix& b_block(Index i) const { return b_.at(static_cast<std::size_t>(i - 1)); }

  /// Declared scheduling set; simulation warns when p leaves it.
  std::optional<Box> scheduling_set;

 private:
  Matrix evaluate(const Matrix& block, Index width, const Vector& p) const;

  Index n_u_;
  Index n_y_;
  Index n_p_;
  std::vector<Matrix> a_;
  std::vector<Matrix> b_;
};

/// Samples preceding time 1, oldest first; the last sample is time 0.
struct InitialWindow {
  SignalSequence u;
  SignalSequence p;
  SignalSequence y;

  static InitialWindow zeros(Index n_u, Index n_p, Index n_y, Index length);
};

/// Runs the recursion for k = 1..N; lags reaching before time 1 read the
/// initial window.
/// \throws InitializationError when the window is shorter than the lag.
/// \throws DimensionError on mismatched lengths or dimensions.
SignalSequence simulate_io(const LpvIoModel& model, const SignalSequence& u,
                           const SignalSequence& p, const InitialWindow& init,
                           Diagnostics* diag = nullptr);

/// SISO model with scheduling vector [p, p^2]:
///   a_1 = 1 - 0.5p - 0.1p^2,  a_2 = 0.5 - 0.7p - 0.1p^2,
///   b_1 = 0.5 - 0.4p + 0.01p^2, b_2 = 0.2 - 0.3p - 0.2p^2.
LpvIoModel example1_model();

/// Base scheduling 0.5 sin(0.35 pi k) + 0.5 at integer time k.
double example1_scheduling_base(Index k);

/// Scheduling vectors [p_k, p_k^2] for k = first, ..., first + N - 1.
SignalSequence example1_scheduling(Index length, Index first = 1);

/// Physical parameters of the unbalanced disc, SI units. Defaults are the
/// laboratory setup values (arm length 0.42 mm).
struct PendulumParams {
  double m = 0.07;
  double g = 9.8;
  double l = 0.42e-3;
  double J = 2.2e-4;
  double tau = 0.5971;
  double K_m = 15.3145;
  double T_s = 0.075;

  void validate() const;
};

struct PendulumState {
  double theta = 0.0;
  double omega = 0.0;
};

/// theta'' = -(m g l / J) sin(theta) - theta' / tau + (K_m / tau) u.
struct PendulumPlant {
  PendulumParams params;
  PendulumState state;
};

/// One classical fourth-order Runge-Kutta step with u held constant.
/// \throws DivergenceError when the new state is not finite.
PendulumPlant rk4_step(const PendulumPlant& plant, double u, double dt);

/// Zero-order-hold advance over one sampling period using `substeps` RK4 steps.
PendulumPlant advance_sample(const PendulumPlant& plant, double u, int substeps);

/// sinc(theta) = sin(theta) / theta, equal to 1 at theta = 0.
double pendulum_scheduling(double theta);

/// Scheduling set of the pendulum embedding, [-0.22, 1].
Box pendulum_scheduling_set();

/// Gain-scheduled input-output model of the pendulum with scheduling held
/// frozen over one sample: the linear embedding with p = sinc(theta) is
/// discretized by one RK4 step of length T_s and converted to the second-order
/// input-output form. The coefficients are polynomials of degree 4 in p, so
/// the returned model uses the scheduling vector [p, p^2, p^3, p^4] (see
/// polynomial_lift).
LpvIoModel pendulum_io_model(const PendulumParams& params = {});

/// Maps a scalar scheduling value to [p, p^2, ..., p^degree].
Vector polynomial_lift(double p, Index degree);

/// Deterministic uniform generator (SplitMix64) used by every seeded routine.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

inline constexpr std::uint64_t kDefaultSeed = 42;

/// i.i.d. uniform samples on [lower, upper].
struct UniformExcitation {
  double lower = -1.0;
  double upper = 1.0;
};

/// Random-phase multisine sum_h sin(2 pi h f0 t + phi_h), h = 1..harmonics,
/// f0 = 1 / (N_d T_s), phases uniform on [0, 2 pi), rescaled so that
/// max |u| equals `amplitude`.
struct MultisineExcitation {
  int harmonics = 8;
  double amplitude = 0.25;
  double sample_time = 0.075;
};

using ExcitationSpec = std::variant<UniformExcitation, MultisineExcitation>;

SignalSequence generate_excitation(const ExcitationSpec& spec, Index length, std::uint64_t seed);
std::string describe(const ExcitationSpec& spec);

/// LPV-IO system driven by an exogenous scheduling signal.
struct ScheduledIoSource {
  LpvIoModel model;
  /// Scheduling vectors for k = 1..N.
  std::function<SignalSequence(Index)> scheduling;
};

/// Pendulum simulated from `plant.state`, sampled with zero-order hold;
/// scheduling is sinc of the recorded angle.
struct PendulumSource {
  PendulumPlant plant;
  int substeps = 4;
};

using DataSource = std::variant<ScheduledIoSource, PendulumSource>;

struct PeCertificate {
  Index order = 0;
  Index rank = 0;
  Index required_rank = 0;
  bool passed = false;
};

/// One recorded (u, p, y) trajectory with its lifted sequences and the PE
/// certificate of the auxiliary input [u; p (x) u].
class DataDictionary {
 public:
  /// Computes lifted sequences and certifies the auxiliary input at
  /// `pe_order`. A failing certificate is stored, not thrown.
  DataDictionary(SignalSequence u, SignalSequence p, SignalSequence y, Index pe_order);

  const SignalSequence& u() const { return u_; }
  const SignalSequence& p() const { return p_; }
  const SignalSequence& y() const { return y_; }
  const SignalSequence& u_lifted() const { return u_p_; }
  const SignalSequence& y_lifted() const { return y_p_; }
  const SignalSequence& aux_input() const { return aux_u_; }
  const SignalSequence& aux_output() const { return aux_y_; }
  const PeCertificate& certificate() const { return cert_; }

  Index length() const { return u_.length(); }
  Index n_u() const { return u_.dim(); }
  Index n_p() const { return p_.dim(); }
  Index n_y() const { return y_.dim(); }

  /// Free-form provenance (seed, recipe) copied into exported metadata.
  std::uint64_t seed = kDefaultSeed;
  std::string recipe;

 private:
  SignalSequence u_;
  SignalSequence p_;
  SignalSequence y_;
  SignalSequence u_p_;
  SignalSequence y_p_;
  SignalSequence aux_u_;
  SignalSequence aux_y_;
  PeCertificate cert_;
};

/// Records N_d samples of `source` under the excitation from rest and
/// certifies PE of order `pe_order` (n_x + N_p).
/// \throws ExcitationError when the certificate fails.
/// \throws DivergenceError when the pendulum state blows up.
DataDictionary generate_dictionary(const DataSource& source, const ExcitationSpec& excitation,
                                   Index n_d, std::uint64_t seed, Index pe_order,
                                   Diagnostics* diag = nullptr);

}  // namespace lpvdpc
