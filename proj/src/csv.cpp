#include "lpvdpc/csv.hpp"

#include "lpvdpc/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace lpvdpc {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return std::string(s.substr(a, b - a));
}

std::vector<std::string> channel_names(const std::string& base, Index n) {
  std::vector<std::string> out;
  for (Index i = 1; i <= n; ++i) out.push_back(base + "_" + std::to_string(i));
  return out;
}

// Columns named base_1, base_2, ... in order.
std::vector<std::size_t> channel_columns(const CsvTable& t, const std::string& base) {
  std::vector<std::size_t> cols;
  for (Index i = 1;; ++i) {
    const std::string name = base + "_" + std::to_string(i);
    bool found = false;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (t.header[c] == name) {
        cols.push_back(c);
        found = true;
        break;
      }
    }
    if (!found) break;
  }
  return cols;
}

Matrix channel_matrix(const CsvTable& t, const std::vector<std::size_t>& cols) {
  Matrix m(static_cast<Index>(cols.size()), static_cast<Index>(t.rows.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      m(static_cast<Index>(c), static_cast<Index>(r)) = t.number(r, cols[c]);
    }
  }
  return m;
}

void append_vector(std::string& line, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) {
    line += ',';
    line += format_number(v(i));
  }
}

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0.0) value = 0.0;  // drop the sign of -0
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_number(std::string_view field, long line, long column) {
  const std::string f = trim(field);
  if (f == "inf" || f == "+inf") return std::numeric_limits<double>::infinity();
  if (f == "-inf") return -std::numeric_limits<double>::infinity();
  if (f == "nan") return std::numeric_limits<double>::quiet_NaN();
  double value = 0.0;
  const char* first = f.data();
  if (!f.empty() && f[0] == '+') ++first;
  const auto res = std::from_chars(first, f.data() + f.size(), value);
  if (f.empty() || res.ec != std::errc() || res.ptr != f.data() + f.size()) {
    throw ParseError("line " + std::to_string(line) + ", column " + std::to_string(column) +
                         ": not a number: '" + f + "'",
                     static_cast<std::size_t>(line), static_cast<std::size_t>(column));
  }
  return value;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == name) return c;
  }
  throw ParseError("line 1: missing column '" + name + "'", 1, 0);
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  return parse_number(rows.at(row).at(col), static_cast<long>(row + 2), static_cast<long>(col + 1));
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos
                                                                    ? std::string::npos
                                                                    : comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw ParseError("line " + std::to_string(lineno) + ", column " +
                           std::to_string(std::min(cells.size(), t.header.size()) + 1) +
                           ": expected " + std::to_string(t.header.size()) + " fields, got " +
                           std::to_string(cells.size()),
                       static_cast<std::size_t>(lineno),
                       std::min(cells.size(), t.header.size()) + 1);
    }
    if (static_cast<long>(t.rows.size()) + 2 != lineno) {
      // blank lines inside the body would shift reported coordinates
      throw ParseError("line " + std::to_string(lineno) + ": blank line inside table",
                       static_cast<std::size_t>(lineno), 1);
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw ParseError("empty CSV file", 1, 1);
  return t;
}

CsvTable read_csv(const fs::path& path) { return parse_csv(read_file(path)); }

std::map<std::string, std::string> read_metadata(const fs::path& path) {
  std::map<std::string, std::string> out;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected key = value",
                       lineno, 1);
    }
    out[trim(std::string_view(line).substr(0, eq))] = trim(std::string_view(line).substr(eq + 1));
  }
  return out;
}

void write_dictionary(const fs::path& path, const DataDictionary& dict) {
  std::string text = "k";
  for (const auto& base : {std::pair{"u", dict.n_u()}, std::pair{"p", dict.n_p()},
                           std::pair{"y", dict.n_y()}}) {
    for (const std::string& n : channel_names(base.first, base.second)) text += "," + n;
  }
  text += '\n';
  for (Index k = 1; k <= dict.length(); ++k) {
    std::string line = std::to_string(k);
    append_vector(line, dict.u().at(k));
    append_vector(line, dict.p().at(k));
    append_vector(line, dict.y().at(k));
    text += line + '\n';
  }
  write_file(path, text);

  const PeCertificate& c = dict.certificate();
  std::ostringstream meta;
  meta << "n_u = " << dict.n_u() << '\n'
       << "n_p = " << dict.n_p() << '\n'
       << "n_y = " << dict.n_y() << '\n'
       << "n_d = " << dict.length() << '\n'
       << "seed = " << dict.seed << '\n'
       << "recipe = " << dict.recipe << '\n'
       << "pe_order = " << c.order << '\n'
       << "pe_rank = " << c.rank << '\n'
       << "pe_required_rank = " << c.required_rank << '\n'
       << "pe_passed = " << (c.passed ? "true" : "false") << '\n';
  write_file(fs::path(path.string() + ".meta"), meta.str());
}

DataDictionary read_dictionary(const fs::path& path) {
  const CsvTable t = read_csv(path);
  if (t.rows.empty()) throw ParseError(path.string() + ": dictionary has no samples", 2, 1);
  const auto ucols = channel_columns(t, "u");
  const auto pcols = channel_columns(t, "p");
  const auto ycols = channel_columns(t, "y");
  if (ucols.empty() || ycols.empty()) {
    throw ParseError(path.string() + ": dictionary needs u_1 and y_1 columns", 1, 0);
  }
  if (1 + ucols.size() + pcols.size() + ycols.size() != t.header.size()) {
    throw ParseError(path.string() + ": unexpected columns in dictionary header", 1, 0);
  }
  Index pe_order = 0;
  std::uint64_t seed = kDefaultSeed;
  std::string recipe;
  const fs::path meta_path(path.string() + ".meta");
  if (fs::exists(meta_path)) {
    const auto meta = read_metadata(meta_path);
    try {
      if (meta.count("pe_order")) pe_order = std::stol(meta.at("pe_order"));
      if (meta.count("seed")) seed = std::stoull(meta.at("seed"));
    } catch (const std::exception&) {
      throw ParseError(meta_path.string() + ": malformed integer field", 0, 0);
    }
    if (meta.count("recipe")) recipe = meta.at("recipe");
  }
  DataDictionary dict(SignalSequence(channel_matrix(t, ucols)),
                      SignalSequence(channel_matrix(t, pcols)),
                      SignalSequence(channel_matrix(t, ycols)), pe_order);
  dict.seed = seed;
  dict.recipe = recipe;
  return dict;
}

std::string trajectory_csv(const TrajectoryLog& log, bool timing) {
  if (log.records.empty()) return "k,t,status,solve_ms,objective\n";
  const StepRecord& first = log.records.front();
  std::string text = "k,t";
  for (const auto& base : {std::pair{"r", first.r.size()}, std::pair{"y", first.y.size()},
                           std::pair{"u", first.u.size()}, std::pair{"p", first.p.size()}}) {
    for (const std::string& n : channel_names(base.first, base.second)) text += "," + n;
  }
  text += ",status,solve_ms,objective\n";
  for (const StepRecord& rec : log.records) {
    std::string line = std::to_string(rec.k) + "," + format_number(rec.t);
    append_vector(line, rec.r);
    append_vector(line, rec.y);
    append_vector(line, rec.u);
    append_vector(line, rec.p);
    line += "," + to_string(rec.status);
    line += "," + format_number(timing ? rec.solve_ms : 0.0);
    line += "," + format_number(rec.objective);
    text += line + '\n';
  }
  return text;
}

void write_trajectory(const fs::path& path, const TrajectoryLog& log, bool timing) {
  write_file(path, trajectory_csv(log, timing));
}

QpStatus parse_status(const std::string& text) {
  for (QpStatus s : {QpStatus::kOptimal, QpStatus::kInfeasible, QpStatus::kMaxIterations,
                     QpStatus::kUnbounded}) {
    if (to_string(s) == text) return s;
  }
  throw ParseError("unknown solver status '" + text + "'", 0, 0);
}

TrajectoryLog read_trajectory(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t ck = t.column("k"), ct = t.column("t"), cs = t.column("status"),
                    cm = t.column("solve_ms"), co = t.column("objective");
  const auto rc = channel_columns(t, "r"), yc = channel_columns(t, "y"),
             uc = channel_columns(t, "u"), pc = channel_columns(t, "p");
  auto vec = [&](std::size_t row, const std::vector<std::size_t>& cols) {
    Vector v(static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) v(static_cast<Index>(c)) = t.number(row, cols[c]);
    return v;
  };
  TrajectoryLog log;
  for (std::size_t row = 0; row < t.rows.size(); ++row) {
    StepRecord rec;
    rec.k = static_cast<Index>(t.number(row, ck));
    rec.t = t.number(row, ct);
    rec.r = vec(row, rc);
    rec.y = vec(row, yc);
    rec.u = vec(row, uc);
    rec.p = vec(row, pc);
    try {
      rec.status = parse_status(t.rows[row][cs]);
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(row + 2) + ", column " + std::to_string(cs + 1) +
                           ": " + e.what(),
                       row + 2, cs + 1);
    }
    rec.solve_ms = t.number(row, cm);
    rec.objective = t.number(row, co);
    log.records.push_back(std::move(rec));
  }
  return log;
}

void write_matrix(const fs::path& path, const Matrix& m) {
  std::string text;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) text += ',';
      text += format_number(m(i, j));
    }
    text += '\n';
  }
  write_file(path, text);
}

Matrix read_matrix(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    long col = 1;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string_view cell = std::string_view(line).substr(
          start, comma == std::string::npos ? std::string::npos : comma - start);
      row.push_back(parse_number(cell, lineno, col));
      if (comma == std::string::npos) break;
      start = comma + 1;
      ++col;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(path.string() + ": ragged matrix at line " + std::to_string(lineno),
                       static_cast<std::size_t>(lineno), 1);
    }
    rows.push_back(std::move(row));
  }
  Matrix m(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows[0].size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

void write_qp_archive(const fs::path& dir, const QpProblem& prob) {
  fs::create_directories(dir);
  write_matrix(dir / "P.csv", prob.P);
  write_matrix(dir / "q.csv", prob.q);
  write_matrix(dir / "c0.csv", Matrix::Constant(1, 1, prob.c0));
  write_matrix(dir / "Aeq.csv", prob.Aeq);
  write_matrix(dir / "beq.csv", prob.beq);
  write_matrix(dir / "Ain.csv", prob.Ain);
  write_matrix(dir / "lb.csv", prob.lb);
  write_matrix(dir / "ub.csv", prob.ub);
}

QpProblem read_qp_archive(const fs::path& dir) {
  QpProblem prob;
  prob.P = read_matrix(dir / "P.csv");
  const Index n = prob.P.rows();
  auto vec = [](const Matrix& m) -> Vector {
    return m.size() == 0 ? Vector(0) : Vector(m.reshaped());
  };
  auto mat = [n](Matrix m) { return m.rows() == 0 ? Matrix(0, n) : m; };
  prob.q = vec(read_matrix(dir / "q.csv"));
  prob.c0 = read_matrix(dir / "c0.csv")(0, 0);
  prob.Aeq = mat(read_matrix(dir / "Aeq.csv"));
  prob.beq = vec(read_matrix(dir / "beq.csv"));
  prob.Ain = mat(read_matrix(dir / "Ain.csv"));
  prob.lb = vec(read_matrix(dir / "lb.csv"));
  prob.ub = vec(read_matrix(dir / "ub.csv"));
  return prob;
}

}  // namespace lpvdpc
