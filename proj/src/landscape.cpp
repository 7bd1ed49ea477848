#include "actlab/landscape.hpp"

#include <cmath>
#include <limits>

#include "actlab/error.hpp"
#include "actlab/parallel.hpp"
#include "actlab/rollout.hpp"

namespace actlab {

std::string_view to_string(DirectionNormalization n) {
  return n == DirectionNormalization::FilterWise ? "filter_wise" : "unit_norm";
}

DirectionNormalization parse_normalization(std::string_view name) {
  if (name == "filter_wise") return DirectionNormalization::FilterWise;
  if (name == "unit_norm") return DirectionNormalization::UnitNorm;
  throw ConfigError("unknown direction normalization '" + std::string(name) +
                    "' (expected filter_wise or unit_norm)");
}

void LandscapeConfig::validate() const {
  if (resolution < 1 || resolution % 2 == 0) throw ConfigError("landscape: resolution must be odd and >= 1");
  if (!(span > 0.0) || !std::isfinite(span)) throw ConfigError("landscape: span must be > 0");
  if (samples_per_cell < 1) throw ConfigError("landscape: samples_per_cell must be >= 1");
  if (workers < 1) throw ConfigError("landscape: workers must be >= 1");
}

nlohmann::json to_json(const LandscapeConfig& c) {
  return {{"resolution", c.resolution},
          {"span", c.span},
          {"samples_per_cell", c.samples_per_cell},
          {"direction_seed", c.direction_seed},
          {"normalization", std::string(to_string(c.normalization))}};
}

LandscapeConfig landscape_config_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j, {"resolution", "span", "samples_per_cell", "direction_seed", "normalization"},
                      "landscape");
  LandscapeConfig c;
  try {
    c.resolution = j.value("resolution", c.resolution);
    c.span = j.value("span", c.span);
    c.samples_per_cell = j.value("samples_per_cell", c.samples_per_cell);
    c.direction_seed = j.value("direction_seed", c.direction_seed);
    if (j.contains("normalization")) c.normalization = parse_normalization(j["normalization"].get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("landscape: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

FlatParams gaussian_like(const FlatParams& params, std::uint64_t seed) {
  FlatParams d = FlatParams::zeros(params.layout);
  Rng rng(seed);
  for (double& x : d.data) x = rng.normal();
  return d;
}

double block_norm(std::span<const double> b) {
  double s = 0.0;
  for (double x : b) s += x * x;
  return std::sqrt(s);
}

void normalize_direction(FlatParams& d, const FlatParams& params, DirectionNormalization n) {
  if (n == DirectionNormalization::UnitNorm) {
    const double nd = norm(d);
    for (double& x : d.data) x /= nd;
    return;
  }
  for (const auto& b : params.layout.blocks) {
    auto db = d.block(b.name);
    const double target = block_norm(params.block(b.name));
    const double current = block_norm(db);
    const double scale = (target > 0.0 ? target : 1.0) / current;
    for (double& x : db) x *= scale;
  }
}

}  // namespace

Directions make_directions(const FlatParams& params, std::uint64_t seed,
                           DirectionNormalization normalization) {
  if (params.size() == 0) throw ConfigError("make_directions: empty parameter vector");
  Directions d{gaussian_like(params, derive_seed(seed, {1})),
               gaussian_like(params, derive_seed(seed, {2}))};
  normalize_direction(d.d1, params, normalization);
  normalize_direction(d.d2, params, normalization);
  const double before = norm(d.d2);
  axpy(-dot(d.d1, d.d2) / dot(d.d1, d.d1), d.d1, d.d2);
  // One more pass removes the roundoff left by the first projection.
  axpy(-dot(d.d1, d.d2) / dot(d.d1, d.d1), d.d1, d.d2);
  const double after = norm(d.d2);
  for (double& x : d.d2.data) x *= before / after;
  return d;
}

double grid_coordinate(int index, int resolution, double span) {
  if (resolution == 1) return 0.0;
  return span * static_cast<double>(2 * index - (resolution - 1)) / static_cast<double>(resolution - 1);
}

CellContext CellContext::from_checkpoint(const Checkpoint& ckpt) {
  const RunConfig cfg = ckpt.config();
  return {ckpt.params, cfg.policy_spec(), cfg.task_factory(), ckpt.frozen, cfg.ppo.loss(),
          cfg.env.spec.gamma};
}

CellResult evaluate_cell(const CellContext& ctx, const Directions& dirs, double alpha,
                         double beta, std::int64_t samples, std::uint64_t stream) {
  if (!dirs.d1.same_layout(ctx.params) || !dirs.d2.same_layout(ctx.params))
    throw ConfigError("evaluate_cell: directions do not match the parameter layout");
  if (samples < 1) throw ConfigError("evaluate_cell: samples must be >= 1");
  FlatParams theta = ctx.params;
  for (std::size_t i = 0; i < theta.size(); ++i)
    theta.data[i] += alpha * dirs.d1.data[i] + beta * dirs.d2.data[i];

  CellResult c;
  c.alpha = alpha;
  c.beta = beta;
  const int horizon = ctx.factory().env().spec().horizon;
  const auto episodes = static_cast<std::size_t>((samples + horizon - 1) / horizon);
  try {
    const auto stats = run_episodes(theta, ctx.spec, ctx.factory, episodes, stream,
                                    ActionSelection::Stochastic, ctx.gamma);
    c.reward = stats.mean_discounted();
    c.reward_se = stats.discounted_standard_error();
    c.n_samples = stats.steps;
    c.episode_returns = stats.discounted_returns;
  } catch (const NumericError&) {
    c.reward = std::numeric_limits<double>::quiet_NaN();
  }
  if (ctx.frozen.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    c.loss = {nan, nan, nan, nan};
  } else {
    c.loss = ppo_loss(ctx.frozen, theta, ctx.spec, ctx.loss, 1);
  }
  c.valid = std::isfinite(c.reward) && std::isfinite(c.loss.total) &&
            std::isfinite(c.loss.policy) && std::isfinite(c.loss.value);
  return c;
}

const CellResult& LandscapeGrid::at(int row, int col) const {
  if (row < 0 || col < 0 || row >= resolution || col >= resolution)
    throw ConfigError("landscape cell out of range");
  return cells.at(static_cast<std::size_t>(row) * resolution + col);
}

LandscapeGrid compute_grid(const CellContext& ctx, const Directions& dirs,
                           const LandscapeConfig& cfg, const std::string& checkpoint_id,
                           const std::vector<std::size_t>* order) {
  cfg.validate();
  const std::size_t n = static_cast<std::size_t>(cfg.resolution) * cfg.resolution;
  std::vector<std::size_t> schedule(n);
  for (std::size_t i = 0; i < n; ++i) schedule[i] = i;
  if (order) {
    if (order->size() != n) throw ConfigError("compute_grid: order must list every cell once");
    std::vector<bool> seen(n, false);
    for (std::size_t i : *order) {
      if (i >= n || seen[i]) throw ConfigError("compute_grid: order must list every cell once");
      seen[i] = true;
    }
    schedule = *order;
  }
  LandscapeGrid g;
  g.resolution = cfg.resolution;
  g.span = cfg.span;
  g.samples_per_cell = cfg.samples_per_cell;
  g.direction_seed = cfg.direction_seed;
  g.normalization = cfg.normalization;
  g.checkpoint_id = checkpoint_id;
  g.directions = dirs;
  g.cells.resize(n);
  parallel_for(n, cfg.workers, [&](std::size_t k) {
    const std::size_t idx = schedule[k];
    const int row = static_cast<int>(idx / cfg.resolution);
    const int col = static_cast<int>(idx % cfg.resolution);
    const auto stream = derive_seed(cfg.direction_seed,
                                    {static_cast<std::uint64_t>(row), static_cast<std::uint64_t>(col)});
    CellResult c = evaluate_cell(ctx, dirs, grid_coordinate(col, cfg.resolution, cfg.span),
                                 grid_coordinate(row, cfg.resolution, cfg.span),
                                 cfg.samples_per_cell, stream);
    c.row = row;
    c.col = col;
    g.cells[idx] = std::move(c);
  });
  return g;
}

LandscapeGrid compute_grid(const Checkpoint& ckpt, const LandscapeConfig& cfg,
                           const std::vector<std::size_t>* order) {
  if (ckpt.frozen.empty()) throw ConfigError("checkpoint has no frozen rollout data");
  const CellContext ctx = CellContext::from_checkpoint(ckpt);
  const Directions dirs = make_directions(ckpt.params, cfg.direction_seed, cfg.normalization);
  return compute_grid(ctx, dirs, cfg, ckpt.id(), order);
}

double field_value(const CellResult& c, GridField f) {
  switch (f) {
    case GridField::Reward: return c.reward;
    case GridField::PolicyLoss: return c.loss.policy;
    case GridField::ValueLoss: return c.loss.value;
    case GridField::TotalLoss: return c.loss.total;
  }
  return c.reward;
}

GridSummary summarize(const LandscapeGrid& grid, GridField field) {
  GridSummary s;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -std::numeric_limits<double>::infinity();
  const double center = field_value(grid.center(), field);
  std::size_t valid = 0, near = 0;
  for (const auto& c : grid.cells) {
    if (!c.valid) continue;
    const double v = field_value(c, field);
    ++valid;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
    if (std::abs(v - center) <= 0.05 * std::abs(center)) ++near;
  }
  if (valid == 0) throw NumericError("landscape grid has no valid cells");
  s.near_center_fraction = static_cast<double>(near) / static_cast<double>(valid);
  return s;
}

double bootstrap_standard_error(const Vec& values, int resamples, std::uint64_t seed) {
  const std::size_t n = values.size();
  if (n < 2 || resamples < 2) return 0.0;
  Rng rng(seed);
  Vec means(static_cast<std::size_t>(resamples));
  for (double& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += values[rng.index(n)];
    m = s / static_cast<double>(n);
  }
  double mu = 0.0;
  for (double m : means) mu += m;
  mu /= static_cast<double>(means.size());
  double var = 0.0;
  for (double m : means) var += (m - mu) * (m - mu);
  return std::sqrt(var / static_cast<double>(means.size() - 1));
}

CsvTable grid_table(const LandscapeGrid& grid) {
  CsvTable t;
  t.header = {"row",        "col",        "alpha",     "beta",  "reward",   "policy_loss",
              "value_loss", "total_loss", "n_samples", "valid", "reward_se"};
  for (const auto& c : grid.cells)
    t.add_row({std::to_string(c.row), std::to_string(c.col), format_double(c.alpha),
               format_double(c.beta), format_double(c.reward), format_double(c.loss.policy),
               format_double(c.loss.value), format_double(c.loss.total),
               std::to_string(c.n_samples), c.valid ? "1" : "0", format_double(c.reward_se)});
  return t;
}

nlohmann::json grid_meta(const LandscapeGrid& grid) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : grid.directions.d1.layout.blocks)
    blocks.push_back({{"name", b.name}, {"shape", b.shape}, {"offset", b.offset}});
  return {{"checkpoint", grid.checkpoint_id},
          {"resolution", grid.resolution},
          {"span", grid.span},
          {"samples_per_cell", grid.samples_per_cell},
          {"direction_seed", grid.direction_seed},
          {"cell_stream", "derive_seed(direction_seed, {row, col})"},
          {"normalization", std::string(to_string(grid.normalization))},
          {"layout", blocks},
          {"d1", grid.directions.d1.data},
          {"d2", grid.directions.d2.data}};
}

}  // namespace actlab
