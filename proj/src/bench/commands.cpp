#include "lpvdpc/bench.hpp"

#include "lpvdpc/csv.hpp"
#include "lpvdpc/errors.hpp"
#include "lpvdpc/predictor.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace lpvdpc::bench {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string experiment = "example1";
  std::uint64_t seed = kDefaultSeed;
  Index nd = 0;
  Index np = 0;
  Index nell = 0;
  Index steps = 0;
  std::string config;
  std::string out;
  std::string dict;
  std::string windows;
  std::string dump_qp;
  std::string controller = "both";
  bool timing = false;

  const CLI::App* active = nullptr;

  bool given(const std::string& flag) const {
    const CLI::Option* opt = active ? active->get_option_no_throw(flag) : nullptr;
    return opt && opt->count() > 0;
  }
};

void common_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--experiment", o.experiment, "example1 | example2 | custom");
  cmd->add_option("--seed", o.seed, "excitation seed (default 42)");
  cmd->add_option("--nd", o.nd, "dictionary length N_d");
  cmd->add_option("--np", o.np, "prediction horizon N_p");
  cmd->add_option("--nell", o.nell, "past window length n_ell");
  cmd->add_option("--config", o.config, "key = value configuration file");
  cmd->add_option("--out", o.out, "output directory");
}

ExperimentConfig resolve_config(const Options& o) {
  ExperimentConfig cfg;
  ExperimentId flag_id = ExperimentId::kExample1;
  if (o.experiment == "example1") flag_id = ExperimentId::kExample1;
  else if (o.experiment == "example2") flag_id = ExperimentId::kExample2;
  else if (o.experiment == "custom") flag_id = ExperimentId::kCustom;
  else throw ConfigError("unknown experiment '" + o.experiment + "'");

  if (o.given("--config")) {
    cfg = load_config(o.config);
    if (o.given("--experiment") && cfg.id != flag_id) {
      throw ConfigError("--experiment " + o.experiment + " contradicts the config file id " +
                        to_string(cfg.id));
    }
  } else {
    if (flag_id == ExperimentId::kCustom) {
      throw ConfigError("--experiment custom needs --config");
    }
    cfg = default_config(flag_id);
  }
  if (o.given("--seed")) cfg.seed = o.seed;
  if (o.given("--nd")) cfg.n_d = o.nd;
  if (o.given("--np")) cfg.N_p = o.np;
  if (o.given("--nell")) cfg.n_ell = o.nell;
  if (o.given("--steps")) cfg.steps = o.steps;
  cfg.validate();
  return cfg;
}

fs::path out_dir(const Options& o, const ExperimentConfig& cfg) {
  const fs::path dir = output_directory(cfg, o.given("--out") ? std::optional<std::string>(o.out)
                                                      : std::nullopt);
  fs::create_directories(dir);
  return dir;
}

void print_certificate(std::ostream& out, const PeCertificate& c) {
  out << "PE certificate: order " << c.order << ", rank " << c.rank << " / " << c.required_rank
      << (c.passed ? " (passed)" : " (FAILED)") << '\n';
}

DataDictionary obtain_dictionary(const Options& o, const Experiment& ex, std::ostream& out) {
  const Index order = ex.cfg.n_x + ex.cfg.N_p;
  if (!o.dict.empty()) {
    const DataDictionary raw = read_dictionary(o.dict);
    DataDictionary dict(raw.u(), raw.p(), raw.y(), order);
    dict.seed = raw.seed;
    dict.recipe = raw.recipe;
    if (dict.n_u() != 1 || dict.n_y() != 1 || dict.n_p() != ex.n_p) {
      throw ConfigError("dictionary dimensions do not match experiment " + to_string(ex.cfg.id));
    }
    return dict;
  }
  DataDictionary dict = make_dictionary(ex);
  out << "dictionary: " << dict.length() << " samples, seed " << dict.seed << '\n';
  return dict;
}

// Scheduling handed to the controller at step k (1-based).
SignalSequence schedule_input(const Experiment& ex, Index k) {
  if (const auto* io = std::get_if<IoLoopPlant>(&ex.plant)) {
    if (ex.control.sched_policy == SchedulingPolicy::kKnownFuture) {
      Matrix m(ex.n_p, ex.control.N_p);
      for (Index j = 0; j < ex.control.N_p; ++j) m.col(j) = io->scheduling(k + j);
      return SignalSequence(std::move(m));
    }
    return SignalSequence(Matrix(io->scheduling(k)));
  }
  const auto& pend = std::get<PendulumLoopPlant>(ex.plant);
  return SignalSequence(Matrix::Constant(1, 1, pendulum_scheduling(pend.plant.state.theta)));
}

int cmd_generate(const Options& o, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(o);
  const Experiment ex = make_experiment(cfg);
  check_dictionary_length(cfg);
  const DataDictionary dict = make_dictionary(ex);
  const fs::path dir = out_dir(o, cfg);
  write_dictionary(dir / "dictionary.csv", dict);
  out << "dictionary: " << dict.length() << " samples, seed " << dict.seed << " -> "
      << (dir / "dictionary.csv").string() << '\n';
  print_certificate(out, dict.certificate());
  return kExitOk;
}

int cmd_check_pe(const Options& o, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(o);
  const Experiment ex = make_experiment(cfg);
  out << "minimum dictionary length: "
      << min_dictionary_length(1, ex.n_p, cfg.n_x, cfg.N_p) << '\n';
  out << "spanning dictionary length: "
      << spanning_dictionary_length(1, 1, ex.n_p, cfg.n_x, cfg.n_ell, cfg.N_p) << '\n';
  const Index order = cfg.n_x + cfg.N_p;
  if (!o.dict.empty()) {
    const DataDictionary raw = read_dictionary(o.dict);
    const DataDictionary dict(raw.u(), raw.p(), raw.y(), order);
    out << "dictionary: " << dict.length() << " samples from " << o.dict << '\n';
    print_certificate(out, dict.certificate());
    if (!dict.certificate().passed) {
      throw ExcitationError("dictionary is not persistently exciting of order " +
                                std::to_string(order),
                            static_cast<long>(dict.certificate().rank),
                            static_cast<long>(dict.certificate().required_rank));
    }
    return kExitOk;
  }
  check_dictionary_length(cfg);
  const DataDictionary dict = make_dictionary(ex);
  out << "dictionary: " << dict.length() << " samples, seed " << dict.seed << '\n';
  print_certificate(out, dict.certificate());
  return kExitOk;
}

struct Windows {
  PredictionWindows w;
  std::optional<SignalSequence> oracle;
};

Windows read_windows(const fs::path& path, Index n_ell, Index horizon, Index n_p) {
  const CsvTable t = read_csv(path);
  const std::size_t ck = t.column("k");
  const std::size_t cu = t.column("u_1");
  const std::size_t cy = t.column("y_1");
  std::vector<std::size_t> cp;
  for (Index i = 1; i <= n_p; ++i) cp.push_back(t.column("p_" + std::to_string(i)));
  if (t.header.size() != static_cast<std::size_t>(3 + n_p)) {
    throw ParseError(path.string() + ": expected columns k,u_1,p_1..p_" + std::to_string(n_p) +
                         ",y_1",
                     1, 0);
  }
  if (t.rows.size() != static_cast<std::size_t>(n_ell + horizon)) {
    throw ParseError(path.string() + ": expected " + std::to_string(n_ell) + " past and " +
                         std::to_string(horizon) + " future rows",
                     0, 0);
  }
  Matrix pu(1, n_ell), pp(n_p, n_ell), py(1, n_ell), fu(1, horizon), fp(n_p, horizon),
      fy(1, horizon);
  bool have_future_y = true;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double k = t.number(r, ck);
    const bool past = r < static_cast<std::size_t>(n_ell);
    if ((past && k > 0) || (!past && k < 1)) {
      throw ParseError("line " + std::to_string(r + 2) + ", column " + std::to_string(ck + 1) +
                           ": past rows need k <= 0 and future rows k >= 1",
                       r + 2, ck + 1);
    }
    const Index c = past ? static_cast<Index>(r) : static_cast<Index>(r) - n_ell;
    Matrix& um = past ? pu : fu;
    Matrix& pm = past ? pp : fp;
    um(0, c) = t.number(r, cu);
    for (Index i = 0; i < n_p; ++i) pm(i, c) = t.number(r, cp[static_cast<std::size_t>(i)]);
    if (past) {
      py(0, c) = t.number(r, cy);
    } else if (t.rows[r][cy].empty()) {
      have_future_y = false;
    } else {
      fy(0, c) = t.number(r, cy);
    }
  }
  Windows out{{SignalSequence(pu), SignalSequence(pp), SignalSequence(py), SignalSequence(fu),
               SignalSequence(fp)},
              std::nullopt};
  if (have_future_y) out.oracle = SignalSequence(fy);
  return out;
}

void write_windows(const fs::path& path, const Windows& win) {
  const Index n_ell = win.w.past_u.length();
  const Index horizon = win.w.future_u.length();
  const Index n_p = win.w.past_p.dim();
  std::string text = "k,u_1";
  for (Index i = 1; i <= n_p; ++i) text += ",p_" + std::to_string(i);
  text += ",y_1\n";
  for (Index j = 1; j <= n_ell + horizon; ++j) {
    const bool past = j <= n_ell;
    const Index c = past ? j : j - n_ell;
    text += std::to_string(j - n_ell) + ",";
    text += format_number((past ? win.w.past_u : win.w.future_u).value(c, 1));
    for (Index i = 0; i < n_p; ++i) {
      text += "," + format_number((past ? win.w.past_p : win.w.future_p).value(c, i + 1));
    }
    text += ",";
    if (past) text += format_number(win.w.past_y.value(c, 1));
    else if (win.oracle) text += format_number(win.oracle->value(c, 1));
    text += "\n";
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
}

// Seeded consistent windows from the true system: a random run whose last
// n_ell samples form the past and whose continuation is the oracle future.
Windows generated_windows(const Experiment& ex, Index horizon) {
  Rng rng(ex.cfg.seed + 1);
  const Index n_ell = ex.cfg.n_ell;
  const Index warm = 20;
  const Index total = warm + n_ell + horizon;
  if (ex.cfg.plant == PlantKind::kExample1) {
    const LpvIoModel model = example1_model();
    std::vector<double> u(static_cast<std::size_t>(total));
    for (double& v : u) v = rng.uniform(-1.0, 1.0);
    const Index first = 1 + static_cast<Index>(rng.uniform(0.0, 100.0));
    const SignalSequence useq = SignalSequence::from_scalars(u);
    const SignalSequence pseq = example1_scheduling(total, first);
    const SignalSequence yseq = simulate_io(model, useq, pseq, InitialWindow::zeros(1, 2, 1, 2));
    const Index f0 = warm + n_ell + 1;
    return {{useq.slice(warm + 1, n_ell), pseq.slice(warm + 1, n_ell), yseq.slice(warm + 1, n_ell),
             useq.slice(f0, horizon), pseq.slice(f0, horizon)},
            yseq.slice(f0, horizon)};
  }
  PendulumPlant plant{PendulumParams{}, PendulumState{}};
  Matrix u(1, total), p(1, total), y(1, total);
  for (Index k = 0; k < total; ++k) {
    y(0, k) = plant.state.theta;
    p(0, k) = pendulum_scheduling(plant.state.theta);
    u(0, k) = rng.uniform(-0.25, 0.25);
    plant = advance_sample(plant, u(0, k), 4);
  }
  const SignalSequence us(u), ps(p), ys(y);
  const Index f0 = warm + n_ell + 1;
  return {{us.slice(warm + 1, n_ell), ps.slice(warm + 1, n_ell), ys.slice(warm + 1, n_ell),
           us.slice(f0, horizon), ps.slice(f0, horizon)},
          ys.slice(f0, horizon)};
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(o);
  const Experiment ex = make_experiment(cfg);
  const DataDictionary dict = obtain_dictionary(o, ex, out);
  const Index horizon = cfg.N_p;
  const PredictorBlocks blocks = build_blocks(dict, cfg.n_ell, horizon, cfg.n_x);
  const fs::path dir = out_dir(o, cfg);

  Windows win = o.windows.empty() ? generated_windows(ex, horizon)
                                  : read_windows(o.windows, cfg.n_ell, horizon, ex.n_p);
  if (o.windows.empty()) write_windows(dir / "windows.csv", win);
  if (!win.oracle && cfg.plant == PlantKind::kExample1) {
    const InitialWindow init{win.w.past_u, win.w.past_p, win.w.past_y};
    win.oracle = simulate_io(example1_model(), win.w.future_u, win.w.future_p, init);
  }
  const PredictorSolution pred = predict(blocks, win.w);

  std::string text = "k,y_pred_1";
  if (win.oracle) text += ",y_oracle_1";
  text += "\n";
  double max_err = 0.0;
  for (Index k = 1; k <= horizon; ++k) {
    text += std::to_string(k) + "," + format_number(pred.predicted_y.value(k, 1));
    if (win.oracle) {
      text += "," + format_number(win.oracle->value(k, 1));
      max_err = std::max(max_err, std::abs(pred.predicted_y.value(k, 1) - win.oracle->value(k, 1)));
    }
    text += "\n";
  }
  std::ofstream(dir / "prediction.csv", std::ios::binary | std::ios::trunc) << text;
  out << "prediction: " << horizon << " samples, residual " << pred.residual << " -> "
      << (dir / "prediction.csv").string() << '\n';
  if (win.oracle) out << "max |y_pred - y_oracle| = " << max_err << '\n';
  return kExitOk;
}

std::string metrics_table(const ExperimentConfig& cfg, const std::vector<TrajectoryLog>& logs,
                          const std::vector<std::string>& aborted) {
  std::ostringstream ss;
  ss << "experiment " << to_string(cfg.id) << ", seed " << cfg.seed << ", N_d " << cfg.n_d
     << ", N_p " << cfg.N_p << ", n_ell " << cfg.n_ell << ", steps " << cfg.steps << '\n';
  ss << std::left << std::setw(12) << "controller" << std::setw(24) << "rmse" << std::setw(24)
     << "max_viol_u" << std::setw(24) << "max_viol_y" << std::setw(24) << "total_cost"
     << "degraded\n";
  for (const TrajectoryLog& log : logs) {
    if (log.records.empty()) continue;
    const TrackingMetrics m = tracking_metrics(log);
    ss << std::left << std::setw(12) << log.controller << std::setw(24) << format_number(m.rmse)
       << std::setw(24) << format_number(m.max_violation_u) << std::setw(24)
       << format_number(m.max_violation_y) << std::setw(24) << format_number(m.total_cost)
       << log.warnings.size() << '\n';
  }
  if (logs.size() == 2 && logs[0].size() == logs[1].size() && logs[0].size() > 0) {
    double dy = 0.0, du = 0.0;
    for (Index k = 0; k < logs[0].size(); ++k) {
      const auto& a = logs[0].records[static_cast<std::size_t>(k)];
      const auto& b = logs[1].records[static_cast<std::size_t>(k)];
      dy = std::max(dy, (a.y - b.y).lpNorm<Eigen::Infinity>());
      du = std::max(du, (a.u - b.u).lpNorm<Eigen::Infinity>());
    }
    ss << "max |y_dpc - y_mpc| = " << format_number(dy) << '\n';
    ss << "max |u_dpc - u_mpc| = " << format_number(du) << '\n';
  }
  for (const std::string& a : aborted) ss << "aborted: " << a << '\n';
  return ss.str();
}

int cmd_run(const Options& o, std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = resolve_config(o);
  const Experiment ex = make_experiment(cfg);
  std::vector<std::string> which;
  if (o.controller == "both") which = {"dpc", "mpc"};
  else if (o.controller == "dpc" || o.controller == "dpc-only") which = {"dpc"};
  else if (o.controller == "mpc" || o.controller == "mpc-only") which = {"mpc"};
  else throw ConfigError("unknown controller '" + o.controller + "'");

  const fs::path dir = out_dir(o, cfg);
  std::optional<DataDictionary> dict;
  if (std::find(which.begin(), which.end(), "dpc") != which.end()) {
    dict = obtain_dictionary(o, ex, out);
    print_certificate(out, dict->certificate());
    write_dictionary(dir / "dictionary.csv", *dict);
  }

  std::vector<TrajectoryLog> logs;
  std::vector<std::string> aborted;
  int code = kExitOk;
  for (const std::string& name : which) {
    std::unique_ptr<PredictiveController> ctrl;
    if (name == "dpc") ctrl = std::make_unique<DpcController>(*dict, ex.control, cfg.n_x);
    else ctrl = make_mpc(ex);
    if (!o.dump_qp.empty()) {
      ctrl->reset(ex.init);
      const SignalSequence p_hat = ctrl->resolve_schedule(schedule_input(ex, 1));
      write_qp_archive(fs::path(o.dump_qp) / name,
                       ctrl->build_qp(reference_window(ex.reference, 1, cfg.N_p), p_hat));
    }
    TrajectoryLog log;
    try {
      log = closed_loop(ex.plant, *ctrl, ex.reference, cfg.steps, ex.init);
    } catch (const ClosedLoopAbort& abort) {
      log = abort.partial();
      aborted.push_back(name + " at step " + std::to_string(abort.step()) + ": " + abort.what());
      err << abort.what() << '\n';
      try {
        std::rethrow_exception(abort.cause());
      } catch (const InfeasibleStepError&) {
        code = kExitInfeasible;
      } catch (...) {
        if (code == kExitOk) code = kExitFailure;
      }
    }
    for (const std::string& w : log.warnings) err << "warning: " << w << '\n';
    write_trajectory(dir / ("trajectory_" + name + ".csv"), log, o.timing);
    std::ofstream(dir / ("plot_" + name + ".svg"), std::ios::binary | std::ios::trunc)
        << trajectory_svg(log, to_string(cfg.id) + " " + name);
    logs.push_back(std::move(log));
  }
  const std::string table = metrics_table(cfg, logs, aborted);
  std::ofstream(dir / "metrics.txt", std::ios::binary | std::ios::trunc) << table;
  out << table;
  out << "outputs in " << dir.string() << '\n';
  return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Data-driven predictive control for LPV systems"};
  app.require_subcommand(1);
  Options o;

  CLI::App* gen = app.add_subcommand("generate", "record a dictionary and certify PE");
  CLI::App* sim = app.add_subcommand("simulate", "data-driven simulation of given windows");
  CLI::App* run = app.add_subcommand("run", "closed-loop DPC / MPC experiment");
  CLI::App* pe = app.add_subcommand("check-pe", "persistency-of-excitation check");
  for (CLI::App* cmd : {gen, sim, run, pe}) common_options(cmd, o);
  for (CLI::App* cmd : {sim, run, pe}) {
    cmd->add_option("--dict", o.dict, "dictionary CSV (generated when absent)");
  }
  sim->add_option("--windows", o.windows, "windows CSV k,u_1,p_..,y_1 (k <= 0 past)");
  run->add_option("--controller", o.controller, "dpc | mpc | both (dpc-only, mpc-only)");
  run->add_option("--steps", o.steps, "closed-loop steps");
  run->add_flag("--timing", o.timing, "record solver wall time in the CSV");
  run->add_option("--dump-qp", o.dump_qp, "write the first-step QP of each controller here");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  }

  for (CLI::App* cmd : {gen, sim, run, pe}) {
    if (*cmd) o.active = cmd;
  }
  try {
    if (*gen) return cmd_generate(o, out);
    if (*sim) return cmd_simulate(o, out);
    if (*run) return cmd_run(o, out, err);
    if (*pe) return cmd_check_pe(o, out);
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kExitParse;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitParse;
  } catch (const ExcitationError& e) {
    err << "PE failure: " << e.what() << '\n';
    return kExitExcitation;
  } catch (const UncertifiedDictionaryError& e) {
    err << "PE failure: " << e.what() << '\n';
    return kExitExcitation;
  } catch (const InconsistentTrajectoryError& e) {
    err << "inconsistent windows: " << e.what() << '\n';
    return kExitInconsistent;
  } catch (const InfeasibleStepError& e) {
    err << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, out, err);
}

}  // namespace lpvdpc::bench
