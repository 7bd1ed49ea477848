#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "actlab/csv.hpp"

namespace actlab {

enum class ColorMap { Viridis, Grayscale };

ColorMap parse_color_map(std::string_view name);
// t in [0, 1] (clamped) to 8-bit RGB.
std::array<int, 3> colormap_rgb(ColorMap cmap, double t);

struct HeatmapOptions {
  std::string column = "reward";
  bool negate = false;  // plot -value (loss surfaces)
  ColorMap color_map = ColorMap::Viridis;
  std::string title;
  std::optional<int> resolution;  // inferred from the largest row/col index if unset
};

// Grid CSV with row, col, valid and the value column. Every cell becomes one
// <rect class="cell">; invalid or non-finite cells are hatched. Throws
// ConfigError listing missing (row,col) pairs.
std::string render_heatmap(const CsvTable& grid, const HeatmapOptions& opt);

struct LineSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> band;  // +-band around y; empty for none
};

struct AxisLabels {
  std::string title;
  std::string x;
  std::string y;
};

std::string render_lines(const std::vector<LineSeries>& series, const AxisLabels& labels);

// One configuration (for example one actuation mode): a curve CSV holding
// one or more seeds.
struct CurveSet {
  std::string label;
  CsvTable table;
};

struct CurveOptions {
  std::string x_column = "env_step";  // or gradient_step
  std::string y_column = "mean_return";
  std::string title;
};

// Mean and population std across seeds at each x. Seeds with different x
// grids are linearly interpolated onto the first seed's grid, restricted to
// the range every seed covers; a warning is appended for each such set.
LineSeries aggregate_seeds(const CurveSet& set, const CurveOptions& opt,
                           std::vector<std::string>* warnings);

std::string render_learning_curves(const std::vector<CurveSet>& sets, const CurveOptions& opt,
                                   std::vector<std::string>* warnings = nullptr);

// One line per batch size for `term`, band = std of the cosine.
std::string render_gradsim(const CsvTable& records, const std::string& term);

enum class PlotKind { Heatmap, LineCurve };

struct PlotSpec {
  PlotKind kind = PlotKind::Heatmap;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::string> labels;    // one per input (line curves)
  std::vector<std::string> columns;   // heatmap: {value}; curves: {x, y}
  ColorMap color_map = ColorMap::Viridis;
  bool negate = false;
  std::string title;
  std::filesystem::path output;
};

// Reads the inputs, checks that referenced columns exist, writes the SVG and
// returns any warnings.
std::vector<std::string> render_plot(const PlotSpec& spec);

}  // namespace actlab
