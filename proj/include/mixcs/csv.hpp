#pragma once

#include "mixcs/core.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace mixcs {

/// '%.17g' formatting; round-trips every double exactly.
std::string format_double(double value);

/// Row-major CSV, one matrix row per line.
std::string matrix_to_csv(const MatrixXd& m);
void write_matrix_csv(const MatrixXd& m, const std::string& path);
MatrixXd read_matrix_csv(const std::string& path);
/// Accepts a single column or a single row.
VectorXd read_vector_csv(const std::string& path);

/// Header plus string cells. Lines starting with '#' and blank lines are
/// skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Throws std::invalid_argument for an unknown column.
  std::size_t column(const std::string& name) const;
  std::vector<double> numeric_column(const std::string& name) const;
};

CsvTable parse_csv_table(const std::string& text);
CsvTable read_csv_table(const std::string& path);

std::vector<std::string> split(const std::string& text, char sep);
std::string trim(const std::string& text);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace mixcs
