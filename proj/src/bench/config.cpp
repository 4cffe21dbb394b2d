#include "lpvdpc/bench.hpp"

#include "lpvdpc/csv.hpp"
#include "lpvdpc/errors.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace lpvdpc::bench {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct Entry {
  std::string value;
  std::size_t line = 0;
};

[[noreturn]] void bad(const Entry& e, const std::string& key, const std::string& expected) {
  throw ParseError("line " + std::to_string(e.line) + ": " + key + " = '" + e.value +
                       "': expected " + expected,
                   e.line, 0);
}

double as_double(const Entry& e, const std::string& key) {
  try {
    return parse_number(e.value, static_cast<long>(e.line), 0);
  } catch (const ParseError&) {
    bad(e, key, "a number");
  }
}

Index as_index(const Entry& e, const std::string& key) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(e.value, &pos);
  } catch (const std::exception&) {
    bad(e, key, "an integer");
  }
  if (pos != e.value.size()) bad(e, key, "an integer");
  return static_cast<Index>(v);
}

bool as_bool(const Entry& e, const std::string& key) {
  if (e.value == "true") return true;
  if (e.value == "false") return false;
  bad(e, key, "true or false");
}

ExperimentId as_id(const Entry& e, const std::string& key) {
  if (e.value == "example1") return ExperimentId::kExample1;
  if (e.value == "example2") return ExperimentId::kExample2;
  if (e.value == "custom") return ExperimentId::kCustom;
  bad(e, key, "example1, example2 or custom");
}

}  // namespace

std::string to_string(ExperimentId id) {
  switch (id) {
    case ExperimentId::kExample1:
      return "example1";
    case ExperimentId::kExample2:
      return "example2";
    case ExperimentId::kCustom:
      return "custom";
  }
  return "unknown";
}

Index ExperimentConfig::plant_n_p() const { return plant == PlantKind::kExample1 ? 2 : 1; }

ExperimentConfig default_config(ExperimentId id) {
  ExperimentConfig c;
  c.id = id;
  if (id == ExperimentId::kExample2) {
    c.plant = PlantKind::kPendulum;
    c.n_d = 34;
    c.Q = 0.1;
    c.R = 0.05;
    c.u_min = -0.25;
    c.u_max = 0.25;
    c.policy = SchedulingPolicy::kFrozen;
    c.ref_levels = {0.5, -0.5, 0.8, -0.3, 0.0, 0.6};
    c.step_every = 53;  // 4 s at 75 ms
    c.steps = 320;
  } else {
    c.ref_levels = {0.5, -0.5, 0.8, -0.8, 0.3};
    c.step_every = 20;
    c.steps = 100;
  }
  return c;
}

void ExperimentConfig::validate() const {
  if (N_p < 1) throw ConfigError("n_p (prediction horizon) must be at least 1");
  if (n_ell < 1) throw ConfigError("n_ell must be at least 1");
  if (n_x < 1) throw ConfigError("n_x must be at least 1");
  if (n_d < 1) throw ConfigError("n_d must be positive");
  if (n_ell + N_p > n_d) {
    throw ConfigError("n_ell + n_p = " + std::to_string(n_ell + N_p) +
                      " exceeds the dictionary length " + std::to_string(n_d));
  }
  if (!(Q >= 0.0) || !(R >= 0.0)) throw ConfigError("weights q and r must be nonnegative");
  if (!(reg >= 0.0)) throw ConfigError("reg must be nonnegative");
  if (!(u_min <= u_max)) throw ConfigError("u_min exceeds u_max");
  if (!(y_min <= y_max)) throw ConfigError("y_min exceeds y_max");
  if (!(qp_tol > 0.0) || qp_max_iter < 1) throw ConfigError("solver tol and max_iter must be positive");
  if (ref_levels.empty()) throw ConfigError("reference needs at least one level");
  if (step_every < 1) throw ConfigError("step_every must be at least 1");
  if (steps < 1) throw ConfigError("steps must be at least 1");
  if (plant == PlantKind::kPendulum && policy == SchedulingPolicy::kKnownFuture) {
    throw ConfigError("the pendulum scheduling is endogenous; use policy = frozen");
  }
}

void check_dictionary_length(const ExperimentConfig& cfg) {
  const Index need = min_dictionary_length(1, cfg.plant_n_p(), cfg.n_x, cfg.N_p);
  if (cfg.n_d < need) {
    throw ExcitationError("n_d = " + std::to_string(cfg.n_d) +
                              " is below the minimum dictionary length " + std::to_string(need) +
                              " for n_x = " + std::to_string(cfg.n_x) + ", N_p = " +
                              std::to_string(cfg.N_p),
                          0, static_cast<long>((1 + cfg.plant_n_p()) * (cfg.n_x + cfg.N_p)));
  }
}

ExperimentConfig parse_config(const std::string& text) {
  static const std::map<std::string, std::set<std::string>> kKeys = {
      {"experiment", {"id", "plant", "seed", "n_d", "n_p", "n_ell", "n_x", "steps"}},
      {"weights", {"q", "r", "reg"}},
      {"constraints", {"u_min", "u_max", "y_min", "y_max"}},
      {"scheduling", {"policy"}},
      {"reference", {"levels", "step_every"}},
      {"solver", {"tol", "max_iter", "data_range_restriction"}},
      {"pendulum", {"theta0", "omega0"}},
      {"output", {"dir"}},
  };
  std::map<std::string, Entry> entries;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ParseError("line " + std::to_string(lineno) + ": unterminated section header",
                         lineno, line.size());
      }
      section = trim(line.substr(1, line.size() - 2));
      if (!kKeys.count(section)) {
        throw ParseError("line " + std::to_string(lineno) + ": unknown section [" + section + "]",
                         lineno, 1);
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("line " + std::to_string(lineno) + ": expected key = value", lineno, 1);
    }
    if (section.empty()) {
      throw ParseError("line " + std::to_string(lineno) + ": key outside of a section", lineno, 1);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!kKeys.at(section).count(key)) {
      throw ParseError("line " + std::to_string(lineno) + ": unknown key '" + key +
                           "' in [" + section + "]",
                       lineno, 1);
    }
    const std::string full = section + "." + key;
    if (entries.count(full)) {
      throw ParseError("line " + std::to_string(lineno) + ": duplicate key '" + full + "'", lineno,
                       1);
    }
    if (value.empty()) {
      throw ParseError("line " + std::to_string(lineno) + ": empty value for '" + full + "'",
                       lineno, eq + 2);
    }
    entries[full] = Entry{value, lineno};
  }

  ExperimentId id = ExperimentId::kExample1;
  if (entries.count("experiment.id")) id = as_id(entries.at("experiment.id"), "id");
  PlantKind plant = id == ExperimentId::kExample2 ? PlantKind::kPendulum : PlantKind::kExample1;
  if (entries.count("experiment.plant")) {
    const Entry& e = entries.at("experiment.plant");
    if (id != ExperimentId::kCustom) bad(e, "plant", "no plant key unless id = custom");
    if (e.value == "example1") plant = PlantKind::kExample1;
    else if (e.value == "pendulum") plant = PlantKind::kPendulum;
    else bad(e, "plant", "example1 or pendulum");
  }
  ExperimentConfig c =
      default_config(plant == PlantKind::kPendulum ? ExperimentId::kExample2 : ExperimentId::kExample1);
  c.id = id;
  c.plant = plant;

  for (const auto& [full, e] : entries) {
    const std::string key = full.substr(full.find('.') + 1);
    if (full == "experiment.seed") {
      const Index v = as_index(e, key);
      if (v < 0) bad(e, key, "a nonnegative integer");
      c.seed = static_cast<std::uint64_t>(v);
    } else if (full == "experiment.n_d") c.n_d = as_index(e, key);
    else if (full == "experiment.n_p") c.N_p = as_index(e, key);
    else if (full == "experiment.n_ell") c.n_ell = as_index(e, key);
    else if (full == "experiment.n_x") c.n_x = as_index(e, key);
    else if (full == "experiment.steps") c.steps = as_index(e, key);
    else if (full == "weights.q") c.Q = as_double(e, key);
    else if (full == "weights.r") c.R = as_double(e, key);
    else if (full == "weights.reg") c.reg = as_double(e, key);
    else if (full == "constraints.u_min") c.u_min = as_double(e, key);
    else if (full == "constraints.u_max") c.u_max = as_double(e, key);
    else if (full == "constraints.y_min") c.y_min = as_double(e, key);
    else if (full == "constraints.y_max") c.y_max = as_double(e, key);
    else if (full == "scheduling.policy") {
      if (e.value == "known-future") c.policy = SchedulingPolicy::kKnownFuture;
      else if (e.value == "frozen") c.policy = SchedulingPolicy::kFrozen;
      else bad(e, key, "known-future or frozen");
    } else if (full == "reference.levels") {
      c.ref_levels.clear();
      std::stringstream ss(e.value);
      std::string item;
      while (std::getline(ss, item, ',')) {
        c.ref_levels.push_back(as_double(Entry{trim(item), e.line}, key));
      }
    } else if (full == "reference.step_every") c.step_every = as_index(e, key);
    else if (full == "solver.tol") c.qp_tol = as_double(e, key);
    else if (full == "solver.max_iter") c.qp_max_iter = static_cast<int>(as_index(e, key));
    else if (full == "solver.data_range_restriction") c.data_range_restriction = as_bool(e, key);
    else if (full == "pendulum.theta0") c.theta0 = as_double(e, key);
    else if (full == "pendulum.omega0") c.omega0 = as_double(e, key);
    else if (full == "output.dir") c.out_dir = e.value;
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path.string(), 0, 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::filesystem::path output_directory(const ExperimentConfig& cfg,
                                       const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  const char* root = std::getenv("LPVDPC_OUT");
  const std::filesystem::path base = (root && *root) ? root : "lpvdpc_out";
  return base / to_string(cfg.id);
}

}  // namespace lpvdpc::bench
