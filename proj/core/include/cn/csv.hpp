#pragma once

#include <string>
#include <vector>

#include "cn/math.hpp"

namespace cn {
namespace csv {

// Comma-separated tables with one header row. Cells carry no quoting or
// escapes; every table this project emits is parseable by read_table.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table read_table(const std::string& path);

// Writes via a temp file in the same directory plus rename, so readers never
// observe a half-written table.
void write_table(const std::string& path, const Table& table);

void write_text_atomic(const std::string& path, const std::string& content);

// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

// Strict full-token parse; rejects non-numeric and non-finite cells.
double parse_double(const std::string& cell, const std::string& context);

// Dataset files use the header x_1,...,x_p,y (single outcome) or
// x_1,...,x_p,y_1,...,y_m. Any other header, ragged row, or unparseable cell
// is a data error naming the offending location.
struct DatasetFile {
  Matrix features;
  Matrix outcomes;
};

DatasetFile read_dataset(const std::string& path);
void write_dataset(const std::string& path, const Matrix& features, const Matrix& outcomes);

}  // namespace csv
}  // namespace cn
