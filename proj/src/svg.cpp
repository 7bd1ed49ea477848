#include "actlab/svg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>

#include "actlab/error.hpp"

namespace actlab {

namespace {

// Fixed-point text, independent of the global locale.
std::string num(double x, int decimals = 2) {
  if (!std::isfinite(x)) return "0";
  if (std::abs(x) < 0.5 * std::pow(10.0, -decimals)) x = 0.0;
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::fixed, decimals);
  return std::string(buf, r.ptr);
}

// Compact label text.
std::string label_num(double x) {
  if (!std::isfinite(x)) return "nan";
  if (x == 0.0) return "0";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 4);
  return std::string(buf, r.ptr);
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string hex(const std::array<int, 3>& c) {
  static const char* digits = "0123456789abcdef";
  std::string s = "#";
  for (int v : c) {
    s.push_back(digits[(v >> 4) & 0xf]);
    s.push_back(digits[v & 0xf]);
  }
  return s;
}

const std::array<std::string, 6> kPalette = {"#1f77b4", "#d62728", "#2ca02c",
                                             "#ff7f0e", "#9467bd", "#8c564b"};

std::string header(int w, int h) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(w) + "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " +
         std::to_string(w) + " " + std::to_string(h) + "\">\n<rect width=\"" + std::to_string(w) +
         "\" height=\"" + std::to_string(h) + "\" fill=\"#ffffff\"/>\n";
}

std::string text(double x, double y, std::string_view s, std::string_view anchor = "middle",
                 int size = 12) {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-family=\"sans-serif\" font-size=\"" +
         std::to_string(size) + "\" text-anchor=\"" + std::string(anchor) + "\">" + escape(s) +
         "</text>\n";
}

double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const std::size_t j = static_cast<std::size_t>(it - xs.begin());
  const double t = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
  return ys[j - 1] + t * (ys[j] - ys[j - 1]);
}

std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
  if (!(hi > lo)) return {lo};
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) {
      step = m * mag;
      break;
    }
  std::vector<double> out;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) out.push_back(v);
  return out;
}

}  // namespace

ColorMap parse_color_map(std::string_view name) {
  if (name == "viridis") return ColorMap::Viridis;
  if (name == "gray" || name == "grayscale") return ColorMap::Grayscale;
  throw ConfigError("unknown color map '" + std::string(name) + "' (expected viridis or gray)");
}

std::array<int, 3> colormap_rgb(ColorMap cmap, double t) {
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
  if (cmap == ColorMap::Grayscale) {
    const int v = static_cast<int>(std::lround(20.0 + 215.0 * t));
    return {v, v, v};
  }
  static const double anchors[5][3] = {
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  const double s = t * 4.0;
  const int i = std::min(3, static_cast<int>(s));
  const double f = s - i;
  std::array<int, 3> c{};
  for (int k = 0; k < 3; ++k)
    c[k] = static_cast<int>(std::lround(anchors[i][k] + f * (anchors[i + 1][k] - anchors[i][k])));
  return c;
}

std::string render_heatmap(const CsvTable& grid, const HeatmapOptions& opt) {
  const std::size_t cr = grid.column("row"), cc = grid.column("col"), cv = grid.column(opt.column);
  const bool has_valid = grid.has_column("valid");
  const std::size_t cvalid = has_valid ? grid.column("valid") : 0;
  int res = opt.resolution.value_or(0);
  if (!opt.resolution)
    for (std::size_t i = 0; i < grid.rows.size(); ++i)
      res = std::max({res, std::stoi(grid.rows[i][cr]) + 1, std::stoi(grid.rows[i][cc]) + 1});
  if (res < 1) throw ConfigError("heatmap: grid has no cells");

  std::vector<double> value(static_cast<std::size_t>(res) * res, 0.0);
  std::vector<int> state(value.size(), -1);  // -1 missing, 0 invalid, 1 valid
  for (std::size_t i = 0; i < grid.rows.size(); ++i) {
    const int r = std::stoi(grid.rows[i][cr]), c = std::stoi(grid.rows[i][cc]);
    if (r < 0 || c < 0 || r >= res || c >= res)
      throw ConfigError("heatmap: cell (" + std::to_string(r) + "," + std::to_string(c) + ") is outside the grid");
    const std::size_t k = static_cast<std::size_t>(r) * res + c;
    double v = grid.number(i, cv);
    if (opt.negate) v = -v;
    const bool ok = std::isfinite(v) && (!has_valid || grid.rows[i][cvalid] == "1");
    value[k] = v;
    state[k] = ok ? 1 : 0;
  }
  std::string missing;
  for (int r = 0; r < res; ++r)
    for (int c = 0; c < res; ++c)
      if (state[static_cast<std::size_t>(r) * res + c] < 0)
        missing += (missing.empty() ? "" : " ") + std::string("(") + std::to_string(r) + "," +
                   std::to_string(c) + ")";
  if (!missing.empty()) throw ConfigError("heatmap: missing cells " + missing);

  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t k = 0; k < value.size(); ++k)
    if (state[k] == 1) {
      lo = std::min(lo, value[k]);
      hi = std::max(hi, value[k]);
    }
  const bool any = lo <= hi;
  const bool constant = any && lo == hi;

  const double plot = 480.0, cell = plot / res, left = 40.0, top = 50.0;
  const int width = 640, height = 580;
  std::string s = header(width, height);
  s += "<defs>\n<pattern id=\"hatch\" patternUnits=\"userSpaceOnUse\" width=\"6\" height=\"6\">"
       "<rect width=\"6\" height=\"6\" fill=\"#ffffff\"/><path d=\"M0,6 L6,0\" stroke=\"#888888\" "
       "stroke-width=\"1\"/></pattern>\n<linearGradient id=\"cbar\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">\n";
  for (int i = 0; i <= 10; ++i)
    s += "<stop offset=\"" + num(i / 10.0, 1) + "\" stop-color=\"" +
         hex(colormap_rgb(opt.color_map, i / 10.0)) + "\"/>\n";
  s += "</linearGradient>\n</defs>\n";
  std::string title = opt.title.empty() ? opt.column : opt.title;
  if (opt.negate) title += " (negated)";
  s += text(left + plot / 2, 30, title, "middle", 16);
  // Row 0 (most negative beta) at the bottom.
  for (int r = 0; r < res; ++r) {
    for (int c = 0; c < res; ++c) {
      const std::size_t k = static_cast<std::size_t>(r) * res + c;
      const double x = left + c * cell, y = top + (res - 1 - r) * cell;
      std::string fill;
      if (state[k] == 1) {
        const double t = constant ? 0.5 : (value[k] - lo) / (hi - lo);
        fill = hex(colormap_rgb(opt.color_map, t));
      } else {
        fill = "url(#hatch)";
      }
      s += "<rect class=\"cell\" data-row=\"" + std::to_string(r) + "\" data-col=\"" +
           std::to_string(c) + "\" data-valid=\"" + std::to_string(state[k]) + "\" x=\"" + num(x) +
           "\" y=\"" + num(y) + "\" width=\"" + num(cell) + "\" height=\"" + num(cell) +
           "\" fill=\"" + fill + "\"/>\n";
    }
  }
  const double cx = left + (res / 2 + 0.5) * cell, cy = top + (res - 1 - res / 2 + 0.5) * cell;
  const double m = std::max(4.0, cell * 0.6);
  s += "<g class=\"center-marker\" stroke=\"#000000\" stroke-width=\"2\"><line x1=\"" + num(cx - m) +
       "\" y1=\"" + num(cy) + "\" x2=\"" + num(cx + m) + "\" y2=\"" + num(cy) + "\"/><line x1=\"" +
       num(cx) + "\" y1=\"" + num(cy - m) + "\" x2=\"" + num(cx) + "\" y2=\"" + num(cy + m) +
       "\"/></g>\n";
  s += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(plot) + "\" height=\"" +
       num(plot) + "\" fill=\"none\" stroke=\"#000000\"/>\n";
  s += text(left + plot / 2, top + plot + 30, "alpha (d1)");
  s += "<text x=\"20\" y=\"" + num(top + plot / 2) + "\" font-family=\"sans-serif\" font-size=\"12\" "
       "text-anchor=\"middle\" transform=\"rotate(-90 20 " + num(top + plot / 2) + ")\">beta (d2)</text>\n";

  const double bx = left + plot + 30, bw = 20;
  s += "<rect class=\"colorbar\" x=\"" + num(bx) + "\" y=\"" + num(top) + "\" width=\"" + num(bw) +
       "\" height=\"" + num(plot) + "\" fill=\"url(#cbar)\" stroke=\"#000000\"/>\n";
  const std::string max_label = any ? label_num(hi) : "n/a";
  const std::string min_label = any ? label_num(lo) : "n/a";
  s += "<text class=\"colorbar-max\" x=\"" + num(bx + bw + 4) + "\" y=\"" + num(top + 10) +
       "\" font-family=\"sans-serif\" font-size=\"12\">" + escape(max_label) + "</text>\n";
  s += "<text class=\"colorbar-min\" x=\"" + num(bx + bw + 4) + "\" y=\"" + num(top + plot) +
       "\" font-family=\"sans-serif\" font-size=\"12\">" + escape(min_label) + "</text>\n";
  if (constant) s += text(bx + bw / 2, top + plot + 30, "min = max", "middle", 11);
  s += "</svg>\n";
  return s;
}

std::string render_lines(const std::vector<LineSeries>& series, const AxisLabels& labels) {
  const int width = 760, height = 460;
  const double left = 80, right = 180, top = 40, bottom = 60;
  const double pw = width - left - right, ph = height - top - bottom;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& l : series)
    for (std::size_t i = 0; i < l.x.size(); ++i) {
      const double b = l.band.empty() ? 0.0 : l.band[i];
      x0 = std::min(x0, l.x[i]);
      x1 = std::max(x1, l.x[i]);
      y0 = std::min(y0, l.y[i] - b);
      y1 = std::max(y1, l.y[i] + b);
    }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x0 == x1) x0 -= 0.5, x1 += 0.5;
  if (y0 == y1) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::string s = header(width, height);
  s += text(left + pw / 2, 24, labels.title, "middle", 16);
  s += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" +
       num(ph) + "\" fill=\"none\" stroke=\"#000000\"/>\n";
  for (double t : nice_ticks(x0, x1)) {
    s += "<line x1=\"" + num(px(t)) + "\" y1=\"" + num(top + ph) + "\" x2=\"" + num(px(t)) +
         "\" y2=\"" + num(top + ph + 5) + "\" stroke=\"#000000\"/>\n";
    s += text(px(t), top + ph + 18, label_num(t), "middle", 11);
  }
  for (double t : nice_ticks(y0, y1)) {
    s += "<line x1=\"" + num(left - 5) + "\" y1=\"" + num(py(t)) + "\" x2=\"" + num(left) +
         "\" y2=\"" + num(py(t)) + "\" stroke=\"#000000\"/>\n";
    s += text(left - 8, py(t) + 4, label_num(t), "end", 11);
  }
  s += text(left + pw / 2, height - 15, labels.x);
  s += "<text x=\"18\" y=\"" + num(top + ph / 2) + "\" font-family=\"sans-serif\" font-size=\"12\" "
       "text-anchor=\"middle\" transform=\"rotate(-90 18 " + num(top + ph / 2) + ")\">" +
       escape(labels.y) + "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& l = series[k];
    const std::string& color = kPalette[k % kPalette.size()];
    if (l.x.empty()) continue;
    if (!l.band.empty()) {
      std::string pts;
      for (std::size_t i = 0; i < l.x.size(); ++i)
        pts += num(px(l.x[i])) + "," + num(py(l.y[i] + l.band[i])) + " ";
      for (std::size_t i = l.x.size(); i-- > 0;)
        pts += num(px(l.x[i])) + "," + num(py(l.y[i] - l.band[i])) + (i ? " " : "");
      s += "<polygon class=\"band\" points=\"" + pts + "\" fill=\"" + color +
           "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    }
    std::string pts;
    for (std::size_t i = 0; i < l.x.size(); ++i)
      pts += (i ? " " : "") + num(px(l.x[i])) + "," + num(py(l.y[i]));
    s += "<polyline class=\"mean\" points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
         "\" stroke-width=\"2\"/>\n";
    const double ly = top + 10 + 20.0 * k;
    s += "<g class=\"legend\"><line x1=\"" + num(left + pw + 15) + "\" y1=\"" + num(ly) + "\" x2=\"" +
         num(left + pw + 40) + "\" y2=\"" + num(ly) + "\" stroke=\"" + color +
         "\" stroke-width=\"2\"/>" + text(left + pw + 46, ly + 4, l.label, "start", 12) + "</g>\n";
  }
  s += "</svg>\n";
  return s;
}

LineSeries aggregate_seeds(const CurveSet& set, const CurveOptions& opt,
                           std::vector<std::string>* warnings) {
  const std::size_t cx = set.table.column(opt.x_column), cy = set.table.column(opt.y_column);
  const bool has_seed = set.table.has_column("seed");
  const std::size_t cs = has_seed ? set.table.column("seed") : 0;
  std::map<std::string, std::vector<std::pair<double, double>>> by_seed;
  std::vector<std::string> seed_order;
  for (std::size_t i = 0; i < set.table.rows.size(); ++i) {
    const std::string seed = has_seed ? set.table.rows[i][cs] : "0";
    if (!by_seed.count(seed)) seed_order.push_back(seed);
    by_seed[seed].emplace_back(set.table.number(i, cx), set.table.number(i, cy));
  }
  LineSeries out;
  out.label = set.label;
  if (by_seed.empty()) {
    return out;
  }
  std::vector<std::vector<double>> xs, ys;
  for (const auto& seed : seed_order) {
    auto pts = by_seed[seed];
    std::stable_sort(pts.begin(), pts.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<double> x, y;
    for (const auto& [a, b] : pts) {
      if (!x.empty() && x.back() == a) continue;  // keep the first value per x
      x.push_back(a);
      y.push_back(b);
    }
    xs.push_back(std::move(x));
    ys.push_back(std::move(y));
  }
  bool same = true;
  for (const auto& x : xs) same = same && x == xs.front();
  std::vector<double> grid = xs.front();
  if (!same) {
    double lo = -INFINITY, hi = INFINITY;
    for (const auto& x : xs) {
      lo = std::max(lo, x.front());
      hi = std::min(hi, x.back());
    }
    std::vector<double> g;
    for (double v : grid)
      if (v >= lo && v <= hi) g.push_back(v);
    grid = std::move(g);
    if (warnings)
      warnings->push_back("'" + set.label + "': seeds use different " + opt.x_column +
                          " grids; resampled by linear interpolation onto " +
                          std::to_string(grid.size()) + " common points");
  }
  const double n = static_cast<double>(xs.size());
  for (double x : grid) {
    std::vector<double> v;
    for (std::size_t k = 0; k < xs.size(); ++k) v.push_back(interpolate(xs[k], ys[k], x));
    double mean = 0.0;
    for (double a : v) mean += a;
    mean /= n;
    double var = 0.0;
    for (double a : v) var += (a - mean) * (a - mean);
    out.x.push_back(x);
    out.y.push_back(mean);
    out.band.push_back(std::sqrt(var / n));
  }
  return out;
}

std::string render_learning_curves(const std::vector<CurveSet>& sets, const CurveOptions& opt,
                                   std::vector<std::string>* warnings) {
  if (sets.empty()) throw ConfigError("learning curves: no input");
  std::vector<LineSeries> lines;
  for (const auto& set : sets) {
    if (set.table.rows.empty()) throw ConfigError("learning curves: '" + set.label + "' has no rows");
    lines.push_back(aggregate_seeds(set, opt, warnings));
  }
  const std::string xl = opt.x_column == "gradient_step" ? "gradient steps" : "environment steps";
  return render_lines(lines, {opt.title.empty() ? "learning curves (mean +- std over seeds)" : opt.title, xl,
                              opt.y_column});
}

std::string render_gradsim(const CsvTable& records, const std::string& term) {
  const std::size_t ct = records.column("term"), cb = records.column("batch_size"),
                    cx = records.column("env_step"), cm = records.column("mean_cos"),
                    cs = records.column("std_cos");
  std::map<long long, LineSeries> by_batch;
  for (std::size_t i = 0; i < records.rows.size(); ++i) {
    if (records.rows[i][ct] != term) continue;
    const long long b = std::stoll(records.rows[i][cb]);
    auto& l = by_batch[b];
    l.label = "batch " + std::to_string(b);
    l.x.push_back(records.number(i, cx));
    l.y.push_back(records.number(i, cm));
    l.band.push_back(records.number(i, cs));
  }
  if (by_batch.empty()) throw ConfigError("gradsim plot: no records for term '" + term + "'");
  std::vector<LineSeries> lines;
  for (auto& [b, l] : by_batch) lines.push_back(std::move(l));
  return render_lines(lines, {"cosine similarity to the oracle gradient (" + term + " loss)",
                              "environment steps", "mean cosine similarity"});
}

std::vector<std::string> render_plot(const PlotSpec& spec) {
  if (spec.inputs.empty()) throw ConfigError("plot: no input files");
  if (spec.output.empty()) throw ConfigError("plot: no output path");
  std::vector<std::string> warnings;
  std::string svg;
  if (spec.kind == PlotKind::Heatmap) {
    const CsvTable t = read_csv(spec.inputs.front());
    HeatmapOptions opt;
    if (!spec.columns.empty()) opt.column = spec.columns.front();
    opt.negate = spec.negate;
    opt.color_map = spec.color_map;
    opt.title = spec.title;
    svg = render_heatmap(t, opt);
  } else {
    CurveOptions opt;
    if (spec.columns.size() >= 1) opt.x_column = spec.columns[0];
    if (spec.columns.size() >= 2) opt.y_column = spec.columns[1];
    opt.title = spec.title;
    std::vector<CurveSet> sets;
    for (std::size_t i = 0; i < spec.inputs.size(); ++i) {
      CsvTable t = read_csv(spec.inputs[i]);
      t.column(opt.x_column);
      t.column(opt.y_column);
      sets.push_back({i < spec.labels.size() ? spec.labels[i] : spec.inputs[i].stem().string(), std::move(t)});
    }
    svg = render_learning_curves(sets, opt, &warnings);
  }
  write_text_file(spec.output, svg);
  return warnings;
}

}  // namespace actlab
