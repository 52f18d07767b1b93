#include "cn/csv.hpp"

#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>

#include "cn/errors.hpp"

namespace cn {
namespace csv {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') {
    cells.emplace_back();
  }
  return cells;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  return line;
}

}  // namespace

Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path);
  }
  Table table;
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError(path + ": empty file");
  }
  table.header = split_line(strip_cr(line));
  if (table.header.empty()) {
    throw DataError(path + ": empty header row");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) {
      continue;
    }
    auto cells = split_line(line);
    if (cells.size() != table.header.size()) {
      throw DataError(path + ": line " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  return table;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) {
      throw IoError("cannot write " + tmp.string());
    }
    out << content;
    if (!out.flush()) {
      throw IoError("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot replace " + path);
  }
}

void write_table(const std::string& path, const Table& table) {
  std::ostringstream out;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    out << (i ? "," : "") << table.header[i];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << (i ? "," : "") << row[i];
    }
    out << '\n';
  }
  write_text_atomic(path, out.str());
}

std::string format_double(double v) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, result.ptr);
}

double parse_double(const std::string& cell, const std::string& context) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto result = std::from_chars(begin, end, value);
  if (result.ec != std::errc() || result.ptr != end || !std::isfinite(value)) {
    throw DataError(context + ": cell '" + cell + "' is not a finite number");
  }
  return value;
}

namespace {

// Accepts x_1..x_p then either y or y_1..y_m; returns the outcome width.
Eigen::Index validate_dataset_header(const std::vector<std::string>& header,
                                     const std::string& path) {
  std::size_t i = 0;
  while (i < header.size() && header[i] == "x_" + std::to_string(i + 1)) {
    ++i;
  }
  const std::size_t p = i;
  if (p == 0) {
    throw DataError(path + ": header must start with x_1");
  }
  if (i < header.size() && header[i] == "y" && i + 1 == header.size()) {
    return 1;
  }
  std::size_t m = 0;
  while (i < header.size() && header[i] == "y_" + std::to_string(m + 1)) {
    ++i;
    ++m;
  }
  if (m == 0 || i != header.size()) {
    throw DataError(path + ": header must be x_1..x_p followed by y or y_1..y_m");
  }
  return static_cast<Eigen::Index>(m);
}

}  // namespace

DatasetFile read_dataset(const std::string& path) {
  const Table table = read_table(path);
  const Eigen::Index m = validate_dataset_header(table.header, path);
  const auto p = static_cast<Eigen::Index>(table.header.size()) - m;
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  if (n == 0) {
    throw DataError(path + ": no data rows");
  }
  DatasetFile file;
  file.features.resize(n, p);
  file.outcomes.resize(n, m);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = table.rows[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < p + m; ++c) {
      const std::string context =
          path + ": row " + std::to_string(r + 2) + " column " + std::to_string(c + 1);
      const double v = parse_double(row[static_cast<std::size_t>(c)], context);
      if (c < p) {
        file.features(r, c) = v;
      } else {
        file.outcomes(r, c - p) = v;
      }
    }
  }
  return file;
}

void write_dataset(const std::string& path, const Matrix& features, const Matrix& outcomes) {
  if (features.rows() != outcomes.rows()) {
    throw ConfigError("write_dataset: row counts differ");
  }
  Table table;
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    table.header.push_back("x_" + std::to_string(c + 1));
  }
  if (outcomes.cols() == 1) {
    table.header.emplace_back("y");
  } else {
    for (Eigen::Index c = 0; c < outcomes.cols(); ++c) {
      table.header.push_back("y_" + std::to_string(c + 1));
    }
  }
  table.rows.reserve(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    std::vector<std::string> row;
    row.reserve(table.header.size());
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
      row.push_back(format_double(features(r, c)));
    }
    for (Eigen::Index c = 0; c < outcomes.cols(); ++c) {
      row.push_back(format_double(outcomes(r, c)));
    }
    table.rows.push_back(std::move(row));
  }
  write_table(path, table);
}

}  // namespace csv
}  // namespace cn
