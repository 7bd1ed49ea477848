#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "actlab/checkpoint.hpp"

namespace actlab {

// 17 significant digits, '.' separator regardless of locale; parses back to
// the same double. Non-finite values print as
// nan, inf, -inf.
std::string format_double(double x);
double parse_double(std::string_view text);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Throws ConfigError if the column does not exist.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
  double number(std::size_t row, std::size_t col) const { return parse_double(rows.at(row).at(col)); }
  void add_row(std::vector<std::string> row);
};

// Plain comma-separated text; fields never contain commas or quotes.
std::string to_csv_text(const CsvTable& table);
CsvTable parse_csv(std::string_view text);

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

// Columns: seed, env_step, gradient_step, mean_return, std_return, discounted_return.
CsvTable curve_table(const std::vector<CurvePoint>& curve);
std::vector<CurvePoint> curve_from_table(const CsvTable& table);

}  // namespace actlab
