#include "lpvdpc/bench.hpp"
#include "lpvdpc/csv.hpp"
#include "lpvdpc/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

using namespace lpvdpc;
using namespace lpvdpc::bench;
namespace fs = std::filesystem;

namespace {

fs::path work_dir(const std::string& name) {
  const fs::path d = fs::current_path() / "bench_work" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("number formatting round-trips") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::uniform_int_distribution<int> e(-300, 300);
  for (int i = 0; i < 2000; ++i) {
    const double x = std::ldexp(d(gen), e(gen));
    CHECK(same_bits(parse_number(format_number(x), 1, 1), x));
  }
  const double sub = std::numeric_limits<double>::denorm_min() * 3;
  CHECK(same_bits(parse_number(format_number(sub), 1, 1), sub));
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(std::isnan(parse_number("nan", 1, 1)));
  CHECK(parse_number("-inf", 1, 1) == -std::numeric_limits<double>::infinity());
  try {
    parse_number("1.5x", 7, 3);
    FAIL("expected ParseError");
  } catch (const ParseError& err) {
    CHECK(err.line() == 7);
    CHECK(err.column() == 3);
  }
  CHECK_THROWS_AS(parse_number("", 1, 1), ParseError);
}

TEST_CASE("csv tables") {
  const CsvTable t = parse_csv("a,b\n1,2\n3,4\n");
  CHECK(t.header.size() == 2);
  CHECK(t.number(1, t.column("b")) == 4.0);
  CHECK_THROWS_AS(t.column("c"), ParseError);
  try {
    parse_csv("a,b\n1,2\n3\n");
    FAIL("expected ParseError");
  } catch (const ParseError& err) {
    CHECK(err.line() == 3);
  }
  const CsvTable bad = parse_csv("a,b\n1,zz\n");
  try {
    bad.number(0, 1);
    FAIL("expected ParseError");
  } catch (const ParseError& err) {
    CHECK(err.line() == 2);
    CHECK(err.column() == 2);
  }
  CHECK_THROWS_AS(parse_csv(""), ParseError);
}

TEST_CASE("dictionary files are lossless") {
  const fs::path dir = work_dir("dict");
  const Experiment ex = make_experiment(default_config(ExperimentId::kExample1));
  DataDictionary dict = make_dictionary(ex);
  dict.seed = 42;
  write_dictionary(dir / "d.csv", dict);
  const DataDictionary back = read_dictionary(dir / "d.csv");
  CHECK(back.u().samples() == dict.u().samples());
  CHECK(back.p().samples() == dict.p().samples());
  CHECK(back.y().samples() == dict.y().samples());
  CHECK(back.seed == 42);
  CHECK(back.recipe == dict.recipe);
  CHECK(back.certificate().rank == dict.certificate().rank);
  CHECK(back.certificate().order == 7);
  const auto meta = read_metadata(dir / "d.csv.meta");
  CHECK(meta.at("n_d") == "48");
  CHECK(meta.at("pe_rank") == "21");
}

TEST_CASE("trajectory and qp files are lossless") {
  const fs::path dir = work_dir("traj");
  TrajectoryLog log;
  std::mt19937_64 gen(6);
  std::normal_distribution<double> d;
  for (Index k = 1; k <= 5; ++k) {
    StepRecord r;
    r.k = k;
    r.t = 0.075 * static_cast<double>(k - 1);
    r.r = Vector::Constant(1, d(gen));
    r.y = Vector::Constant(1, d(gen));
    r.u = Vector::Constant(1, d(gen));
    r.p = Vector::Constant(2, d(gen));
    r.objective = d(gen);
    r.solve_ms = 1.25;
    r.status = k == 3 ? QpStatus::kMaxIterations : QpStatus::kOptimal;
    log.records.push_back(r);
  }
  write_trajectory(dir / "t.csv", log, true);
  const TrajectoryLog back = read_trajectory(dir / "t.csv");
  REQUIRE(back.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(back.records[i].k == log.records[i].k);
    CHECK(same_bits(back.records[i].t, log.records[i].t));
    CHECK(back.records[i].y == log.records[i].y);
    CHECK(back.records[i].p == log.records[i].p);
    CHECK(same_bits(back.records[i].objective, log.records[i].objective));
    CHECK(back.records[i].status == log.records[i].status);
    CHECK(back.records[i].solve_ms == 1.25);
  }
  CHECK(trajectory_csv(log, false).find("1.25") == std::string::npos);
  CHECK(parse_status("max-iterations") == QpStatus::kMaxIterations);
  CHECK_THROWS_AS(parse_status("bogus"), ParseError);

  QpProblem qp = QpProblem::unconstrained(Matrix::Random(3, 3), Vector::Random(3), 0.1);
  qp.Ain = Matrix::Random(2, 3);
  qp.lb = Vector::Constant(2, -std::numeric_limits<double>::infinity());
  qp.ub = Vector::Random(2);
  write_qp_archive(dir / "qp", qp);
  const QpProblem q2 = read_qp_archive(dir / "qp");
  CHECK(q2.P == qp.P);
  CHECK(q2.q == qp.q);
  CHECK(q2.c0 == qp.c0);
  CHECK(q2.Aeq.rows() == 0);
  CHECK(q2.Aeq.cols() == 3);
  CHECK(q2.Ain == qp.Ain);
  CHECK(q2.lb == qp.lb);
  CHECK(q2.ub == qp.ub);
}

TEST_CASE("config parser") {
  const ExperimentConfig c = parse_config(
      "# comment\n[experiment]\nid = example2\nseed = 7\n[weights]\nq = 0.2  # trailing\n"
      "[reference]\nlevels = 0.1, -0.2\nstep_every = 30\n");
  CHECK(c.id == ExperimentId::kExample2);
  CHECK(c.plant == PlantKind::kPendulum);
  CHECK(c.seed == 7);
  CHECK(c.Q == 0.2);
  CHECK(c.R == 0.05);
  CHECK(c.ref_levels == std::vector<double>{0.1, -0.2});
  CHECK(c.step_every == 30);
  CHECK_NOTHROW(c.validate());

  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse_config(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("[experiment]\nseed = 1\nbogus = 2\n") == 3);
  CHECK(line_of("[experiment]\nseed = 1\nseed = 2\n") == 3);
  CHECK(line_of("[nowhere]\n") == 1);
  CHECK(line_of("seed = 1\n") == 1);
  CHECK(line_of("[experiment]\nseed\n") == 2);
  CHECK(line_of("[experiment]\nseed =\n") == 2);
  CHECK(line_of("[experiment]\nn_d = 4.5\n") == 2);
  CHECK(line_of("[weights]\nq = abc\n") == 2);
  CHECK(line_of("[experiment]\nplant = pendulum\n") == 2);
  CHECK(line_of("[scheduling]\npolicy = sometimes\n") == 2);

  const ExperimentConfig custom =
      parse_config("[experiment]\nid = custom\nplant = pendulum\n[scheduling]\npolicy = known-future\n");
  CHECK(custom.plant == PlantKind::kPendulum);
  CHECK_THROWS_AS(custom.validate(), ConfigError);

  ExperimentConfig shortd = default_config(ExperimentId::kExample1);
  shortd.n_d = 10;
  CHECK_THROWS_AS(check_dictionary_length(shortd), ExcitationError);
  shortd.n_d = 27;
  CHECK_NOTHROW(check_dictionary_length(shortd));
}

TEST_CASE("output directory resolution") {
  ExperimentConfig c = default_config(ExperimentId::kExample2);
  CHECK(output_directory(c, std::string("x/y")) == fs::path("x/y"));
  c.out_dir = "from_cfg";
  CHECK(output_directory(c, std::nullopt) == fs::path("from_cfg"));
  c.out_dir.clear();
  CHECK(output_directory(c, std::nullopt).filename() == "example2");
}

TEST_CASE("reference and experiments") {
  const SignalSequence r = piecewise_reference({1.0, 2.0}, 3, 8);
  CHECK(r.value(3, 1) == 1.0);
  CHECK(r.value(4, 1) == 2.0);
  CHECK(r.value(8, 1) == 2.0);
  const Experiment e2 = make_experiment(default_config(ExperimentId::kExample2));
  CHECK(e2.n_p == 1);
  CHECK(e2.control.sched_policy == SchedulingPolicy::kFrozen);
  const DataDictionary d2 = make_dictionary(e2);
  CHECK(d2.certificate().rank == 14);
  CHECK(trajectory_svg(TrajectoryLog{}, "empty").find("<svg") == 0);
}

TEST_CASE("command line verbs") {
  const fs::path dir = work_dir("cli");
  Run r = cli({"generate", "--experiment", "example1", "--out", (dir / "gen").string()});
  CHECK(r.code == kExitOk);
  CHECK(fs::exists(dir / "gen" / "dictionary.csv"));
  CHECK(r.out.find("rank 21 / 21") != std::string::npos);

  CHECK(cli({"generate", "--experiment", "example1", "--nd", "10", "--out", (dir / "short").string()})
            .code == kExitExcitation);
  CHECK(cli({"frobnicate"}).code == kExitParse);
  CHECK(cli({"run", "--experiment", "example9"}).code == kExitParse);
  CHECK(cli({"run", "--controller", "fuzzy", "--out", (dir / "fz").string()}).code == kExitParse);
  CHECK(cli({"--help"}).code == kExitOk);

  r = cli({"check-pe", "--dict", (dir / "gen" / "dictionary.csv").string()});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("minimum dictionary length: 27") != std::string::npos);

  r = cli({"simulate", "--experiment", "example1", "--out", (dir / "sim").string()});
  CHECK(r.code == kExitOk);
  const auto pos = r.out.find("max |y_pred - y_oracle| = ");
  REQUIRE(pos != std::string::npos);
  CHECK(std::stod(r.out.substr(pos + 26)) < 1e-6);
  CHECK(fs::exists(dir / "sim" / "prediction.csv"));

  r = cli({"run", "--experiment", "example1", "--steps", "12", "--out", (dir / "run").string(),
           "--dump-qp", (dir / "qp").string()});
  CHECK(r.code == kExitOk);
  for (const char* f : {"trajectory_dpc.csv", "trajectory_mpc.csv", "metrics.txt", "plot_dpc.svg",
                        "plot_mpc.svg"}) {
    CHECK(fs::exists(dir / "run" / f));
  }
  CHECK(read_trajectory(dir / "run" / "trajectory_dpc.csv").size() == 12);
  CHECK(read_qp_archive(dir / "qp" / "dpc").P.rows() == 42);
  CHECK(read_qp_archive(dir / "qp" / "mpc").P.rows() == 5);
  CHECK(slurp(dir / "run" / "metrics.txt").find("max |u_dpc - u_mpc|") != std::string::npos);
}

TEST_CASE("command line error paths") {
  const fs::path dir = work_dir("cli_err");
  {
    std::ofstream(dir / "bad.csv") << "k,u_1,p_1,p_2,y_1\n-1,0,0,0,0\n0,0,oops,0,0\n1,0,0,0,\n"
                                   << "2,0,0,0,\n3,0,0,0,\n4,0,0,0,\n5,0,0,0,\n";
  }
  Run r = cli({"simulate", "--windows", (dir / "bad.csv").string(), "--out", (dir / "o").string()});
  CHECK(r.code == kExitParse);
  CHECK(r.err.find("line 3") != std::string::npos);

  {
    std::ofstream(dir / "bad.cfg") << "[experiment]\nid = example1\nnd = 5\n";
  }
  r = cli({"run", "--config", (dir / "bad.cfg").string()});
  CHECK(r.code == kExitParse);
  CHECK(r.err.find("line 3") != std::string::npos);

  {
    std::ofstream(dir / "e2.cfg") << "[experiment]\nid = example2\n";
  }
  CHECK(cli({"run", "--config", (dir / "e2.cfg").string(), "--experiment", "example1"}).code ==
        kExitParse);

  // past window longer than the system order: a perturbed output is inconsistent
  const std::vector<std::string> base{"--experiment", "example1", "--nd", "80", "--nell", "4",
                                      "--out", (dir / "inc").string()};
  std::vector<std::string> args{"simulate"};
  args.insert(args.end(), base.begin(), base.end());
  REQUIRE(cli(args).code == kExitOk);
  CsvTable w = read_csv(dir / "inc" / "windows.csv");
  w.rows[1][4] = format_number(w.number(1, 4) + 0.5);
  {
    std::ofstream f(dir / "w.csv");
    f << "k,u_1,p_1,p_2,y_1\n";
    for (const auto& row : w.rows) f << row[0] << "," << row[1] << "," << row[2] << "," << row[3]
                                     << "," << row[4] << "\n";
  }
  args.push_back("--windows");
  args.push_back((dir / "w.csv").string());
  r = cli(args);
  CHECK(r.code == kExitInconsistent);

  std::vector<std::string> infeasible{"run", "--experiment", "custom", "--config",
                                      (dir / "inf.cfg").string(), "--out", (dir / "inf").string()};
  {
    std::ofstream(dir / "inf.cfg") << "[experiment]\nid = custom\nplant = example1\nsteps = 30\n"
                                   << "[constraints]\ny_min = 0.5\ny_max = 1\n";
  }
  r = cli(infeasible);
  CHECK(r.code == kExitInfeasible);
  CHECK(fs::exists(dir / "inf" / "trajectory_dpc.csv"));
  CHECK(fs::exists(dir / "inf" / "metrics.txt"));
}
