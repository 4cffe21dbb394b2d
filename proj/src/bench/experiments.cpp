#include "lpvdpc/bench.hpp"

#include "lpvdpc/errors.hpp"

namespace lpvdpc::bench {

SignalSequence piecewise_reference(const std::vector<double>& levels, Index step_every,
                                   Index length) {
  if (levels.empty() || step_every < 1 || length < 1) {
    throw ConfigError("reference needs levels, step_every >= 1 and length >= 1");
  }
  std::vector<double> v(static_cast<std::size_t>(length));
  for (Index k = 0; k < length; ++k) {
    const auto seg = static_cast<std::size_t>(k / step_every);
    v[static_cast<std::size_t>(k)] = levels[std::min(seg, levels.size() - 1)];
  }
  return SignalSequence::from_scalars(v);
}

Experiment make_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  DpcConfig ctl;
  ctl.N_p = cfg.N_p;
  ctl.n_ell = cfg.n_ell;
  ctl.Q = Matrix::Constant(1, 1, cfg.Q);
  ctl.R = Matrix::Constant(1, 1, cfg.R);
  ctl.u_box = Box::interval(cfg.u_min, cfg.u_max);
  ctl.y_box = Box::interval(cfg.y_min, cfg.y_max);
  ctl.sched_policy = cfg.policy;
  ctl.reg = cfg.reg;
  ctl.data_range_restriction = cfg.data_range_restriction;
  ctl.qp.tol = cfg.qp_tol;
  ctl.qp.max_iter = cfg.qp_max_iter;

  const SignalSequence reference = piecewise_reference(cfg.ref_levels, cfg.step_every, cfg.steps);
  const Index n_init = std::max<Index>(cfg.n_ell, 2);

  if (cfg.plant == PlantKind::kExample1) {
    LpvIoModel model = example1_model();
    ctl.p_set = model.scheduling_set;
    ScheduledIoSource src{model, [](Index n) { return example1_scheduling(n); }};
    IoLoopPlant plant{model, [](Index k) { return example1_scheduling(1, k).at(1); }, 1.0};
    return Experiment{cfg,
                      src,
                      UniformExcitation{-1.0, 1.0},
                      plant,
                      InitialWindow::zeros(1, 2, 1, n_init),
                      reference,
                      ctl,
                      2};
  }

  PendulumParams params;
  ctl.p_set = pendulum_scheduling_set();
  PendulumPlant rest{params, PendulumState{}};
  PendulumPlant start{params, PendulumState{cfg.theta0, cfg.omega0}};
  InitialWindow init{SignalSequence::zeros(1, n_init),
                     SignalSequence::constant(Vector::Constant(1, pendulum_scheduling(cfg.theta0)),
                                              n_init),
                     SignalSequence::constant(Vector::Constant(1, cfg.theta0), n_init)};
  return Experiment{cfg,
                    PendulumSource{rest, 4},
                    MultisineExcitation{8, 0.25, params.T_s},
                    PendulumLoopPlant{start, 4},
                    init,
                    reference,
                    ctl,
                    1};
}

DataDictionary make_dictionary(const Experiment& ex) {
  check_dictionary_length(ex.cfg);
  DataDictionary dict = generate_dictionary(ex.source, ex.excitation, ex.cfg.n_d, ex.cfg.seed,
                                            ex.cfg.n_x + ex.cfg.N_p);
  dict.recipe = to_string(ex.cfg.id) + ": " + describe(ex.excitation);
  return dict;
}

std::unique_ptr<MpcController> make_mpc(const Experiment& ex) {
  if (ex.cfg.plant == PlantKind::kExample1) {
    return std::make_unique<MpcController>(example1_model(), ex.control);
  }
  return std::make_unique<MpcController>(
      pendulum_io_model(), ex.control, 1,
      [](const Vector& p) { return polynomial_lift(p(0), 4); });
}

}  // namespace lpvdpc::bench
