#include "evcoord/io.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "evcoord/errors.hpp"

namespace evcoord {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '"' && quoted && i + 1 < line.size() && line[i + 1] == '"') {
      field.push_back('"');
      ++i;
    } else if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(trim(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(trim(field));
  return out;
}

}  // namespace

CsvTable CsvTable::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

CsvTable CsvTable::parse(const std::string& text, const std::string& source) {
  CsvTable t;
  t.source_ = source;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    const auto stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    auto fields = split(stripped);
    if (!have_header) {
      t.header_ = fields;
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (!t.columns_.emplace(fields[i], i).second)
          throw ConfigError(source + ": duplicate column '" + fields[i] + "'");
      }
      have_header = true;
      continue;
    }
    if (fields.size() != t.header_.size())
      throw ConfigError(source + ": row " + std::to_string(t.cells_.size() + 1) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(t.header_.size()));
    t.cells_.push_back(std::move(fields));
  }
  if (!have_header) throw ConfigError(source + ": empty CSV");
  return t;
}

const std::string& CsvTable::cell(std::size_t row, const std::string& column) const {
  auto it = columns_.find(column);
  if (it == columns_.end()) throw ConfigError(source_ + ": missing column '" + column + "'");
  if (row >= cells_.size()) throw ConfigError(source_ + ": row out of range");
  return cells_[row][it->second];
}

double CsvTable::number(std::size_t row, const std::string& column) const {
  const auto& s = cell(row, column);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw ConfigError(source_ + ": column '" + column + "' row " + std::to_string(row + 1) +
                      ": not a finite number: '" + s + "'");
  return v;
}

long CsvTable::integer(std::size_t row, const std::string& column) const {
  const auto& s = cell(row, column);
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError(source_ + ": column '" + column + "' row " + std::to_string(row + 1) +
                      ": not an integer: '" + s + "'");
  return v;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  (void)ec;
  return std::string(buf, ptr);
}

TraceWriter::TraceWriter(const std::filesystem::path& path) : out_(path) {
  if (!out_) throw ConfigError("cannot write " + path.string());
  out_ << "iteration,objective,error,dual_gap,primal_residual,n_active\n";
  out_.flush();
}

void TraceWriter::write(const IterationRecord& r) {
  out_ << r.iteration << ',' << format_double(r.objective) << ',' << format_double(r.error) << ','
       << format_double(r.dual_gap) << ',' << format_double(r.primal_residual) << ',' << r.n_active << '\n';
  out_.flush();
}

ProfileWriter::ProfileWriter(const std::filesystem::path& path) : out_(path) {
  if (!out_) throw ConfigError("cannot write " + path.string());
  out_ << "time_index,series_id,value\n";
}

void ProfileWriter::write(const std::string& series_id, const Eigen::VectorXd& values) {
  for (Eigen::Index t = 0; t < values.size(); ++t)
    out_ << (t + 1) << ',' << series_id << ',' << format_double(values[t]) << '\n';
  out_.flush();
}

}  // namespace evcoord
