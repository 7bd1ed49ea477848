#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "actlab/actuation.hpp"
#include "actlab/checkpoint.hpp"
#include "actlab/csv.hpp"
#include "actlab/loss.hpp"
#include "actlab/policy.hpp"

namespace actlab {

enum class DirectionNormalization { FilterWise, UnitNorm };

std::string_view to_string(DirectionNormalization n);
DirectionNormalization parse_normalization(std::string_view name);

struct LandscapeConfig {
  int resolution = 31;
  double span = 1.0;  // alpha and beta range over [-span, span]
  std::int64_t samples_per_cell = 200'000;
  std::uint64_t direction_seed = 0;
  DirectionNormalization normalization = DirectionNormalization::FilterWise;
  int workers = 1;

  void validate() const;
};

nlohmann::json to_json(const LandscapeConfig& c);
LandscapeConfig landscape_config_from_json(const nlohmann::json& j);

struct Directions {
  FlatParams d1;
  FlatParams d2;
};

// Gaussian directions. FilterWise scales each block of d_i to the norm of the
// matching params block (unit norm where that block is zero); UnitNorm scales
// the whole vector to length 1. d2 is then orthogonalized against d1 and
// rescaled to its pre-projection length.
Directions make_directions(const FlatParams& params, std::uint64_t seed,
                           DirectionNormalization normalization);

// alpha_i = span (2i - (resolution - 1)) / (resolution - 1); exactly 0 at the center.
double grid_coordinate(int index, int resolution, double span);

struct CellResult {
  int row = 0;
  int col = 0;
  double alpha = 0.0;
  double beta = 0.0;
  double reward = 0.0;     // mean discounted return
  double reward_se = 0.0;  // standard error of `reward`
  LossTerms loss;
  std::int64_t n_samples = 0;
  bool valid = true;
  Vec episode_returns;  // discounted, per episode (not persisted)
};

// What a cell needs besides its coordinates. The frozen batch provides the
// data the loss terms are evaluated on.
struct CellContext {
  FlatParams params;
  PolicySpec spec;
  TaskFactory factory;
  Batch frozen;
  LossConfig loss;
  double gamma = 0.99;

  static CellContext from_checkpoint(const Checkpoint& ckpt);
};

// theta' = theta + alpha d1 + beta d2. Reward from ceil(samples / horizon)
// stochastic episodes on `stream`; loss terms on the frozen batch. Non-finite
// results mark the cell invalid.
CellResult evaluate_cell(const CellContext& ctx, const Directions& dirs, double alpha,
                         double beta, std::int64_t samples, std::uint64_t stream);

struct LandscapeGrid {
  int resolution = 0;
  double span = 0.0;
  std::int64_t samples_per_cell = 0;
  std::uint64_t direction_seed = 0;
  DirectionNormalization normalization = DirectionNormalization::FilterWise;
  std::string checkpoint_id;
  Directions directions;
  std::vector<CellResult> cells;  // row-major, row indexes beta, col indexes alpha

  const CellResult& at(int row, int col) const;
  const CellResult& center() const { return at(resolution / 2, resolution / 2); }
};

// Per-cell stream: derive_seed(direction_seed, {row, col}). `order` optionally
// permutes the evaluation schedule; results do not depend on it or on the
// number of workers.
LandscapeGrid compute_grid(const CellContext& ctx, const Directions& dirs,
                           const LandscapeConfig& cfg, const std::string& checkpoint_id = {},
                           const std::vector<std::size_t>* order = nullptr);
LandscapeGrid compute_grid(const Checkpoint& ckpt, const LandscapeConfig& cfg,
                           const std::vector<std::size_t>* order = nullptr);

enum class GridField { Reward, PolicyLoss, ValueLoss, TotalLoss };

double field_value(const CellResult& c, GridField f);

struct GridSummary {
  double min = 0.0;
  double max = 0.0;
  double near_center_fraction = 0.0;  // cells with |v - center| <= 5% |center|
};

// Over valid cells only.
GridSummary summarize(const LandscapeGrid& grid, GridField field);

// Bootstrap standard error of the mean of `values`.
double bootstrap_standard_error(const Vec& values, int resamples, std::uint64_t seed);

// Columns: row, col, alpha, beta, reward, policy_loss, value_loss, total_loss,
// n_samples, valid, reward_se.
CsvTable grid_table(const LandscapeGrid& grid);
nlohmann::json grid_meta(const LandscapeGrid& grid);

}  // namespace actlab
