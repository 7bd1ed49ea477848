#include "actlab/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

#include "actlab/error.hpp"

namespace actlab {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  if (s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("not a number: '" + std::string(s) + "'");
  return v;
}

bool CsvTable::has_column(std::string_view name) const {
  for (const auto& h : header)
    if (h == name) return true;
  return false;
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ConfigError("CSV has no column '" + std::string(name) + "'");
}

void CsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != header.size()) throw ConfigError("CSV row width does not match header");
  rows.push_back(std::move(row));
}

namespace {

void append_line(std::string& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += fields[i];
  }
  out.push_back('\n');
}

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.emplace_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::string to_csv_text(const CsvTable& t) {
  std::string out;
  append_line(out, t.header);
  for (const auto& r : t.rows) append_line(out, r);
  return out;
}

CsvTable parse_csv(std::string_view text) {
  CsvTable t;
  bool first = true;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    start = end + 1;
    if (line.empty()) continue;
    if (first) {
      t.header = split(line);
      first = false;
    } else {
      auto row = split(line);
      if (row.size() != t.header.size())
        throw ConfigError("CSV row " + std::to_string(t.rows.size() + 1) + " has " +
                          std::to_string(row.size()) + " fields, header has " +
                          std::to_string(t.header.size()));
      t.rows.push_back(std::move(row));
    }
  }
  if (first) throw ConfigError("CSV is empty");
  return t;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  write_text_file(path, to_csv_text(table));
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text_file(path)); }

CsvTable curve_table(const std::vector<CurvePoint>& curve) {
  CsvTable t;
  t.header = {"seed", "env_step", "gradient_step", "mean_return", "std_return", "discounted_return"};
  for (const auto& p : curve)
    t.add_row({std::to_string(p.seed), std::to_string(p.env_step), std::to_string(p.gradient_step),
               format_double(p.mean_return), format_double(p.std_return),
               format_double(p.discounted_return)});
  return t;
}

std::vector<CurvePoint> curve_from_table(const CsvTable& t) {
  const std::size_t cs = t.column("seed"), ce = t.column("env_step"),
                    cg = t.column("gradient_step"), cm = t.column("mean_return"),
                    cd = t.column("std_return"), cr = t.column("discounted_return");
  std::vector<CurvePoint> out;
  for (const auto& r : t.rows) {
    CurvePoint p;
    p.seed = std::stoull(r[cs]);
    p.env_step = std::stoll(r[ce]);
    p.gradient_step = std::stoll(r[cg]);
    p.mean_return = parse_double(r[cm]);
    p.std_return = parse_double(r[cd]);
    p.discounted_return = parse_double(r[cr]);
    out.push_back(p);
  }
  return out;
}

}  // namespace actlab
