#pragma once

/// \file bench.hpp
/// \brief Experiment harness behind the lpvdpc command-line tool.

#include "lpvdpc/control.hpp"
#include "lpvdpc/plantlab.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace lpvdpc::bench {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitParse = 2,
  kExitExcitation = 3,
  kExitInconsistent = 4,
  kExitInfeasible = 5,
};

enum class ExperimentId { kExample1, kExample2, kCustom };
enum class PlantKind { kExample1, kPendulum };

std::string to_string(ExperimentId id);

/// Everything a run depends on. Defaults are filled per experiment by
/// default_config(); a config file and command-line flags override them.
struct ExperimentConfig {
  ExperimentId id = ExperimentId::kExample1;
  /// Data-generating plant (fixed for example1/example2, selectable for custom).
  PlantKind plant = PlantKind::kExample1;
  std::uint64_t seed = kDefaultSeed;
  Index n_d = 48;
  Index N_p = 5;
  Index n_ell = 2;
  Index n_x = 2;
  double Q = 10.0;
  double R = 0.001;
  double u_min = -5.0;
  double u_max = 5.0;
  double y_min = -1.0;
  double y_max = 1.0;
  SchedulingPolicy policy = SchedulingPolicy::kKnownFuture;
  double reg = 0.0;
  bool data_range_restriction = true;
  double qp_tol = 1e-9;
  int qp_max_iter = 50000;
  /// Piecewise-constant reference: levels[i] holds for `step_every` samples;
  /// the last level is held to the end.
  std::vector<double> ref_levels;
  Index step_every = 20;
  Index steps = 100;
  /// Pendulum initial condition.
  double theta0 = -0.9;
  double omega0 = 0.0;
  /// Empty: derived from the environment (see output_directory).
  std::string out_dir;

  /// Scheduling dimension of the data-generating plant.
  Index plant_n_p() const;

  /// \throws ConfigError on inconsistent values. The dictionary length is
  ///         checked separately (check_dictionary_length) since it is a PE
  ///         failure, not a syntax problem.
  void validate() const;
};

ExperimentConfig default_config(ExperimentId id);

/// \throws ExcitationError when N_d < min_dictionary_length for the
///         configured plant, n_x and N_p.
void check_dictionary_length(const ExperimentConfig& cfg);

/// Strict `key = value` parser with `[section]` headers. Known sections and
/// keys:
///   [experiment] id, plant, seed, n_d, n_p, n_ell, n_x, steps
///   [weights]    q, r, reg
///   [constraints] u_min, u_max, y_min, y_max
///   [scheduling] policy (known-future | frozen)
///   [reference]  levels (comma separated), step_every
///   [solver]     tol, max_iter, data_range_restriction
///   [pendulum]   theta0, omega0
///   [output]     dir
/// Unknown sections or keys, duplicates and malformed values are rejected.
/// The experiment id (if present) selects the defaults that the remaining keys
/// override.
/// \throws ParseError with the line number.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Excitation, data source, loop plant, initial window and reference of one
/// configured experiment.
struct Experiment {
  ExperimentConfig cfg;
  DataSource source;
  ExcitationSpec excitation;
  LoopPlant plant;
  InitialWindow init;
  SignalSequence reference;
  DpcConfig control;
  /// Scheduling dimension seen by the controllers.
  Index n_p = 0;
};

Experiment make_experiment(const ExperimentConfig& cfg);

SignalSequence piecewise_reference(const std::vector<double>& levels, Index step_every,
                                   Index length);

/// Records and certifies the dictionary (order n_x + N_p).
DataDictionary make_dictionary(const Experiment& ex);

std::unique_ptr<MpcController> make_mpc(const Experiment& ex);

/// Static SVG with stacked panels: reference and output, input, scheduling.
std::string trajectory_svg(const TrajectoryLog& log, const std::string& title);

/// Output directory: `--out` if given, else config `dir`, else
/// $LPVDPC_OUT/<experiment>, else ./lpvdpc_out/<experiment>.
std::filesystem::path output_directory(const ExperimentConfig& cfg,
                                       const std::optional<std::string>& flag);

/// Entry point of the command-line tool; returns the process exit code.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lpvdpc::bench
