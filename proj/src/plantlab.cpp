#include "lpvdpc/plantlab.hpp"

#include "lpvdpc/errors.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace lpvdpc {

Box Box::symmetric(Index dim, double half_width) {
  return {Vector::Constant(dim, -half_width), Vector::Constant(dim, half_width)};
}

Box Box::interval(double lower, double upper) {
  return {Vector::Constant(1, lower), Vector::Constant(1, upper)};
}

Box Box::unbounded(Index dim) {
  const double inf = std::numeric_limits<double>::infinity();
  return {Vector::Constant(dim, -inf), Vector::Constant(dim, inf)};
}

bool Box::contains(const Vector& x, double slack) const { return violation(x) <= slack; }

double Box::violation(const Vector& x) const {
  if (x.size() != lower.size()) throw DimensionError("box dimension mismatch");
  double worst = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    worst = std::max({worst, lower(i) - x(i), x(i) - upper(i)});
  }
  return worst;
}

LpvIoModel::LpvIoModel(Index n_u, Index n_y, Index n_p, std::vector<Matrix> a_blocks,
                       std::vector<Matrix> b_blocks)
    : n_u_(n_u), n_y_(n_y), n_p_(n_p), a_(std::move(a_blocks)), b_(std::move(b_blocks)) {
  if (n_u < 1 || n_y < 1 || n_p < 0) throw DimensionError("invalid LPV-IO model dimensions");
  for (const Matrix& a : a_) {
    if (a.rows() != n_y || a.cols() != (n_p + 1) * n_y) {
      throw DimensionError("output coefficient block must be n_y x (n_p+1) n_y");
    }
    if (!a.allFinite()) throw DimensionError("non-finite output coefficient");
  }
  for (const Matrix& b : b_) {
    if (b.rows() != n_y || b.cols() != (n_p + 1) * n_u) {
      throw DimensionError("input coefficient block must be n_y x (n_p+1) n_u");
    }
    if (!b.allFinite()) throw DimensionError("non-finite input coefficient");
  }
}

Matrix LpvIoModel::evaluate(const Matrix& block, Index width, const Vector& p) const {
  if (p.size() != n_p_) throw DimensionError("scheduling vector has wrong dimension");
  Matrix out = block.leftCols(width);
  for (Index j = 0; j < n_p_; ++j) out += p(j) * block.middleCols((j + 1) * width, width);
  return out;
}

Matrix LpvIoModel::a(Index i, const Vector& p) const { return evaluate(a_block(i), n_y_, p); }

Matrix LpvIoModel::b(Index i, const Vector& p) const { return evaluate(b_block(i), n_u_, p); }

InitialWindow InitialWindow::zeros(Index n_u, Index n_p, Index n_y, Index length) {
  return {SignalSequence::zeros(n_u, length), SignalSequence::zeros(n_p, length),
          SignalSequence::zeros(n_y, length)};
}

SignalSequence simulate_io(const LpvIoModel& model, const SignalSequence& u,
                           const SignalSequence& p, const InitialWindow& init,
                           Diagnostics* diag) {
  const Index lag = model.lag();
  const Index n0 = init.u.length();
  if (init.p.length() != n0 || init.y.length() != n0) {
    throw InitializationError("initial windows must share one length");
  }
  if (n0 < lag) {
    throw InitializationError("initial window of length " + std::to_string(n0) +
                              " is shorter than the lag " + std::to_string(lag));
  }
  if (u.length() != p.length()) throw DimensionError("input and scheduling lengths differ");
  if (u.dim() != model.n_u() || init.u.dim() != model.n_u()) {
    throw DimensionError("input dimension does not match the model");
  }
  if (p.dim() != model.n_p() || init.p.dim() != model.n_p()) {
    throw DimensionError("scheduling dimension does not match the model");
  }
  if (init.y.dim() != model.n_y()) throw DimensionError("output dimension does not match");

  const Index n = u.length();
  // Time axis of the extended buffers: column c holds time c - n0 + 1.
  Matrix uu(model.n_u(), n0 + n), pp(model.n_p(), n0 + n), yy(model.n_y(), n0 + n);
  uu << init.u.samples(), u.samples();
  pp << init.p.samples(), p.samples();
  yy.leftCols(n0) = init.y.samples();

  Index outside = 0;
  if (model.scheduling_set) {
    for (Index k = 0; k < n; ++k) {
      if (!model.scheduling_set->contains(p.samples().col(k), 1e-12)) ++outside;
    }
  }
  if (outside > 0 && diag != nullptr) {
    diag->warnings.push_back(std::to_string(outside) +
                             " scheduling samples lie outside the declared scheduling set");
  }

  for (Index c = n0; c < n0 + n; ++c) {
    Vector yk = Vector::Zero(model.n_y());
    for (Index i = 1; i <= model.n_a(); ++i) {
      yk -= model.a(i, pp.col(c - i)) * yy.col(c - i);
    }
    for (Index i = 1; i <= model.n_b(); ++i) {
      yk += model.b(i, pp.col(c - i)) * uu.col(c - i);
    }
    yy.col(c) = yk;
  }
  return SignalSequence(yy.rightCols(n));
}

LpvIoModel example1_model() {
  auto row = [](double c0, double c1, double c2) {
    Matrix m(1, 3);
    m << c0, c1, c2;
    return m;
  };
  LpvIoModel model(1, 1, 2, {row(1.0, -0.5, -0.1), row(0.5, -0.7, -0.1)},
                   {row(0.5, -0.4, 0.01), row(0.2, -0.3, -0.2)});
  model.scheduling_set = Box{Vector::Zero(2), Vector::Ones(2)};
  return model;
}

double example1_scheduling_base(Index k) {
  return 0.5 * std::sin(0.35 * std::numbers::pi * static_cast<double>(k)) + 0.5;
}

SignalSequence example1_scheduling(Index length, Index first) {
  Matrix p(2, length);
  for (Index c = 0; c < length; ++c) {
    const double base = example1_scheduling_base(first + c);
    p(0, c) = base;
    p(1, c) = base * base;
  }
  return SignalSequence(std::move(p));
}

void PendulumParams::validate() const {
  for (double v : {m, g, l, J, tau, K_m, T_s}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw DimensionError("pendulum parameters must be finite and strictly positive");
    }
  }
}

namespace {

struct PendulumRate {
  double dtheta;
  double domega;
};

PendulumRate pendulum_rate(const PendulumParams& prm, double theta, double omega, double u) {
  return {omega, -(prm.m * prm.g * prm.l / prm.J) * std::sin(theta) - omega / prm.tau +
                     (prm.K_m / prm.tau) * u};
}

}  // namespace

PendulumPlant rk4_step(const PendulumPlant& plant, double u, double dt) {
  if (!(dt > 0.0)) throw DimensionError("integration step must be positive");
  if (!std::isfinite(u)) throw DivergenceError("non-finite input applied to the pendulum");
  const auto& prm = plant.params;
  const double th = plant.state.theta;
  const double om = plant.state.omega;
  const PendulumRate k1 = pendulum_rate(prm, th, om, u);
  const PendulumRate k2 =
      pendulum_rate(prm, th + 0.5 * dt * k1.dtheta, om + 0.5 * dt * k1.domega, u);
  const PendulumRate k3 =
      pendulum_rate(prm, th + 0.5 * dt * k2.dtheta, om + 0.5 * dt * k2.domega, u);
  const PendulumRate k4 = pendulum_rate(prm, th + dt * k3.dtheta, om + dt * k3.domega, u);
  PendulumPlant next = plant;
  next.state.theta = th + dt / 6.0 * (k1.dtheta + 2.0 * k2.dtheta + 2.0 * k3.dtheta + k4.dtheta);
  next.state.omega = om + dt / 6.0 * (k1.domega + 2.0 * k2.domega + 2.0 * k3.domega + k4.domega);
  if (!std::isfinite(next.state.theta) || !std::isfinite(next.state.omega)) {
    throw DivergenceError("pendulum state diverged");
  }
  return next;
}

PendulumPlant advance_sample(const PendulumPlant& plant, double u, int substeps) {
  if (substeps < 1) throw DimensionError("substeps must be positive");
  const double dt = plant.params.T_s / substeps;
  PendulumPlant out = plant;
  for (int i = 0; i < substeps; ++i) out = rk4_step(out, u, dt);
  return out;
}

double pendulum_scheduling(double theta) {
  // Below 1e-4 the two-term series is exact to machine precision.
  if (std::abs(theta) < 1e-4) return 1.0 - theta * theta / 6.0;
  return std::sin(theta) / theta;
}

Box pendulum_scheduling_set() { return Box::interval(-0.22, 1.0); }

Vector polynomial_lift(double p, Index degree) {
  Vector v(degree);
  double power = 1.0;
  for (Index j = 0; j < degree; ++j) {
    power *= p;
    v(j) = power;
  }
  return v;
}

LpvIoModel pendulum_io_model(const PendulumParams& prm) {
  prm.validate();
  constexpr Index kDegree = 4;
  const double h = prm.T_s;
  // Frozen-p coefficients (a_1, a_2, b_1, b_2) of the RK4-discretized embedding.
  auto frozen = [&](double p) {
    Eigen::Matrix2d a;
    a << 0.0, 1.0, -(prm.m * prm.g * prm.l / prm.J) * p, -1.0 / prm.tau;
    const Eigen::Vector2d b(0.0, prm.K_m / prm.tau);
    const Eigen::Matrix2d m = h * a;
    const Eigen::Matrix2d m2 = m * m;
    const Eigen::Matrix2d m3 = m2 * m;
    const Eigen::Matrix2d ad = Eigen::Matrix2d::Identity() + m + m2 / 2.0 + m3 / 6.0 + m3 * m / 24.0;
    const Eigen::Vector2d bd =
        h * (Eigen::Matrix2d::Identity() + m / 2.0 + m2 / 6.0 + m3 / 24.0) * b;
    const double tr = ad.trace();
    const Eigen::Vector2d shifted = (ad - tr * Eigen::Matrix2d::Identity()) * bd;
    return Eigen::Vector4d(-tr, ad.determinant(), bd(0), shifted(0));
  };

  // Every coefficient is a polynomial of degree <= 4 in p; interpolate it at
  // Chebyshev nodes of the scheduling set.
  const Box set = pendulum_scheduling_set();
  const double lo = set.lower(0), hi = set.upper(0);
  Matrix vander(kDegree + 1, kDegree + 1);
  Matrix values(kDegree + 1, 4);
  for (Index r = 0; r <= kDegree; ++r) {
    const double node = 0.5 * (lo + hi) + 0.5 * (hi - lo) *
                        std::cos(std::numbers::pi * (2.0 * r + 1.0) / (2.0 * (kDegree + 1)));
    vander(r, 0) = 1.0;
    vander.row(r).tail(kDegree) = polynomial_lift(node, kDegree).transpose();
    values.row(r) = frozen(node).transpose();
  }
  const Matrix coeffs = vander.fullPivLu().solve(values);  // (degree+1) x 4

  auto block = [&](Index which) { return Matrix(coeffs.col(which).transpose()); };
  LpvIoModel model(1, 1, kDegree, {block(0), block(1)}, {block(2), block(3)});
  return model;
}

std::uint64_t Rng::next_u64() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

SignalSequence generate_excitation(const ExcitationSpec& spec, Index length, std::uint64_t seed) {
  Rng rng(seed);
  Matrix u(1, length);
  if (const auto* uni = std::get_if<UniformExcitation>(&spec)) {
    for (Index k = 0; k < length; ++k) u(0, k) = rng.uniform(uni->lower, uni->upper);
    return SignalSequence(std::move(u));
  }
  const auto& ms = std::get<MultisineExcitation>(spec);
  if (ms.harmonics < 1 || !(ms.sample_time > 0.0)) {
    throw DimensionError("multisine needs at least one harmonic and a positive sample time");
  }
  const double f0 = 1.0 / (static_cast<double>(length) * ms.sample_time);
  std::vector<double> phase(static_cast<std::size_t>(ms.harmonics));
  for (double& ph : phase) ph = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (Index k = 0; k < length; ++k) {
    const double t = static_cast<double>(k) * ms.sample_time;
    double s = 0.0;
    for (int h = 1; h <= ms.harmonics; ++h) {
      s += std::sin(2.0 * std::numbers::pi * h * f0 * t + phase[static_cast<std::size_t>(h - 1)]);
    }
    u(0, k) = s;
  }
  const double peak = u.cwiseAbs().maxCoeff();
  if (peak > 0.0) u *= ms.amplitude / peak;
  return SignalSequence(std::move(u));
}

std::string describe(const ExcitationSpec& spec) {
  std::ostringstream os;
  os.precision(17);
  if (const auto* uni = std::get_if<UniformExcitation>(&spec)) {
    os << "uniform[" << uni->lower << "," << uni->upper << "]";
  } else {
    const auto& ms = std::get<MultisineExcitation>(spec);
    os << "multisine(harmonics=" << ms.harmonics << ",amplitude=" << ms.amplitude
       << ",Ts=" << ms.sample_time << ")";
  }
  return os.str();
}

DataDictionary::DataDictionary(SignalSequence u, SignalSequence p, SignalSequence y,
                               Index pe_order)
    : u_(std::move(u)),
      p_(std::move(p)),
      y_(std::move(y)),
      u_p_(kron_lift(p_, u_)),
      y_p_(kron_lift(p_, y_)),
      aux_u_(aux_io(u_, p_)),
      aux_y_(aux_io(y_, p_)) {
  if (u_.length() != y_.length()) throw DimensionError("dictionary u and y lengths differ");
  cert_.order = pe_order;
  cert_.required_rank = aux_u_.dim() * pe_order;
  if (pe_order >= 1 && pe_order <= aux_u_.length()) {
    const PeResult pe = persistency_of_excitation(aux_u_, pe_order);
    cert_.rank = pe.rank;
    cert_.passed = pe.is_pe;
  }
}

DataDictionary generate_dictionary(const DataSource& source, const ExcitationSpec& excitation,
                                   Index n_d, std::uint64_t seed, Index pe_order,
                                   Diagnostics* diag) {
  if (n_d < 1) throw DimensionError("dictionary length must be positive");
  const SignalSequence u = generate_excitation(excitation, n_d, seed);

  std::optional<DataDictionary> dict;
  if (const auto* io = std::get_if<ScheduledIoSource>(&source)) {
    const SignalSequence p = io->scheduling(n_d);
    const auto& model = io->model;
    const InitialWindow rest =
        InitialWindow::zeros(model.n_u(), model.n_p(), model.n_y(), std::max<Index>(model.lag(), 1));
    SignalSequence y = simulate_io(model, u, p, rest, diag);
    dict.emplace(u, p, std::move(y), pe_order);
  } else {
    const auto& pend = std::get<PendulumSource>(source);
    if (u.dim() != 1) throw DimensionError("pendulum takes a scalar input");
    PendulumPlant plant = pend.plant;
    Matrix p(1, n_d), y(1, n_d);
    for (Index k = 0; k < n_d; ++k) {
      y(0, k) = plant.state.theta;
      p(0, k) = pendulum_scheduling(plant.state.theta);
      plant = advance_sample(plant, u.samples()(0, k), pend.substeps);
    }
    dict.emplace(u, SignalSequence(std::move(p)), SignalSequence(std::move(y)), pe_order);
  }

  dict->seed = seed;
  dict->recipe = describe(excitation);
  const PeCertificate& cert = dict->certificate();
  if (!cert.passed) {
    throw ExcitationError("auxiliary input is not persistently exciting of order " +
                              std::to_string(cert.order) + ": rank " + std::to_string(cert.rank) +
                              " of required " + std::to_string(cert.required_rank),
                          cert.rank, cert.required_rank);
  }
  return std::move(*dict);
}

}  // namespace lpvdpc
