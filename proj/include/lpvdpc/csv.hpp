#pragma once

/// \file csv.hpp
/// \brief Plain CSV import/export for dictionaries, trajectory logs and QP
/// archives. Numbers are written in shortest round-trip form, so every file
/// re-imports bit-exactly.

#include "lpvdpc/control.hpp"
#include "lpvdpc/plantlab.hpp"
#include "lpvdpc/qpcore.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace lpvdpc {

/// Shortest decimal form that parses back to the same double.
std::string format_number(double value);

/// Strict parse of a whole field; `line` and `column` (1-based) go into the
/// error. Accepts "inf", "-inf" and "nan".
/// \throws ParseError
double parse_number(std::string_view field, long line, long column);

/// Raw table: header plus string cells, one row per data line.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index of `name`. \throws ParseError when absent.
  std::size_t column(const std::string& name) const;
  /// Parsed numeric cell (row is 0-based); reports file coordinates on error.
  double number(std::size_t row, std::size_t col) const;
};

/// \throws ParseError on ragged rows or an empty file; std::runtime_error when
///         the file cannot be opened.
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text);

/// Dictionary CSV `k,u_1..,p_1..,y_1..` plus a `key = value` sidecar
/// `<path>.meta` holding dimensions, seed, recipe and the PE certificate.
void write_dictionary(const std::filesystem::path& path, const DataDictionary& dict);
/// \throws ParseError on malformed files; the certificate is recomputed.
DataDictionary read_dictionary(const std::filesystem::path& path);

/// `key = value` lines; '#' starts a comment.
std::map<std::string, std::string> read_metadata(const std::filesystem::path& path);

/// Trajectory log CSV `k,t,r_1..,y_1..,u_1..,p_1..,status,solve_ms,objective`.
/// With `timing` false the solve_ms column is written as 0 so that repeated
/// runs are byte-identical.
std::string trajectory_csv(const TrajectoryLog& log, bool timing);
void write_trajectory(const std::filesystem::path& path, const TrajectoryLog& log, bool timing);
/// Records only (weights and boxes are not part of the file).
TrajectoryLog read_trajectory(const std::filesystem::path& path);

QpStatus parse_status(const std::string& text);

/// Dense row-major CSV matrix without header.
void write_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix(const std::filesystem::path& path);

/// One file per QpProblem field (P.csv, q.csv, c0.csv, Aeq.csv, beq.csv,
/// Ain.csv, lb.csv, ub.csv) in `dir`; vectors are stored as columns.
void write_qp_archive(const std::filesystem::path& dir, const QpProblem& prob);
QpProblem read_qp_archive(const std::filesystem::path& dir);

}  // namespace lpvdpc
