#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace evcoord {

/// Header-addressed CSV table; every cell kept as text.
class CsvTable {
 public:
  static CsvTable read(const std::filesystem::path& path);
  static CsvTable parse(const std::string& text, const std::string& source = "<memory>");

  const std::vector<std::string>& header() const noexcept { return header_; }
  std::size_t rows() const noexcept { return cells_.size(); }
  bool has_column(const std::string& name) const { return columns_.count(name) > 0; }

  const std::string& cell(std::size_t row, const std::string& column) const;
  double number(std::size_t row, const std::string& column) const;
  long integer(std::size_t row, const std::string& column) const;

 private:
  std::string source_;
  std::vector<std::string> header_;
  std::map<std::string, std::size_t> columns_;
  std::vector<std::vector<std::string>> cells_;
};

/// Shortest text that reads back to the same double.
std::string format_double(double value);

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;
  double error = 0.0;  // NaN when no reference objective is known
  double dual_gap = 0.0;
  double primal_residual = 0.0;
  int n_active = 0;
};

/// Streams one CSV line per iteration, flushed as it is written.
class TraceWriter {
 public:
  explicit TraceWriter(const std::filesystem::path& path);
  void write(const IterationRecord& record);

 private:
  std::ofstream out_;
};

/// Long-format profile table: time_index, series_id, value.
class ProfileWriter {
 public:
  explicit ProfileWriter(const std::filesystem::path& path);
  /// Writes value(t) for t = 1..size under series_id.
  void write(const std::string& series_id, const Eigen::VectorXd& values);

 private:
  std::ofstream out_;
};

}  // namespace evcoord
