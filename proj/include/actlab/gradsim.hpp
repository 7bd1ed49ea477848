#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "actlab/checkpoint.hpp"
#include "actlab/csv.hpp"
#include "actlab/loss.hpp"

namespace actlab {

enum class LossTerm { Total, Policy, Value };

std::string_view to_string(LossTerm t);
LossTerm parse_loss_term(std::string_view name);

// Oracle: each estimate against the oracle gradient. AllPairs: every pair of
// estimates against each other.
enum class Pairing { Oracle, AllPairs };

struct GradSimConfig {
  std::int64_t oracle_samples = 10'000'000;
  std::vector<std::int64_t> batch_sizes{64};
  int n_estimates = 200;
  std::vector<LossTerm> terms{LossTerm::Total, LossTerm::Policy, LossTerm::Value};
  Pairing pairing = Pairing::Oracle;
  std::uint64_t seed = 0;
  int workers = 1;

  void validate() const;
};

nlohmann::json to_json(const GradSimConfig& c);
GradSimConfig gradsim_config_from_json(const nlohmann::json& j);

struct Cosine {
  double value = 0.0;
  bool degenerate = false;  // a norm was below 1e-12; value is 0
};

// Throws ConfigError on a layout mismatch.
Cosine cosine_similarity(const FlatParams& g1, const FlatParams& g2);

FlatParams select_term(const LossGradients& g, LossTerm term, const LossConfig& cfg);

// Everything gradient estimation needs from a checkpoint.
struct GradContext {
  FlatParams params;
  PolicySpec spec;
  TaskFactory factory;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  std::int64_t n_steps = 2048;  // trainer rollout length
  LossConfig loss;

  static GradContext from_checkpoint(const Checkpoint& ckpt);
};

// `samples` fresh on-policy transitions (whole episodes from fresh resets,
// cut to size) on stream derive_seed(seed, {0}); advantages from the
// checkpoint value function, normalized over the pool; gradients at the
// checkpoint parameters, where the ratio is 1.
LossGradients oracle_gradients(const GradContext& ctx, std::int64_t samples, std::uint64_t seed,
                               int workers = 1);
LossGradients oracle_gradients(const Checkpoint& ckpt, std::int64_t samples, std::uint64_t seed,
                               int workers = 1);
FlatParams oracle_gradient(const Checkpoint& ckpt, LossTerm term, std::int64_t samples,
                           std::uint64_t seed, int workers = 1);

// Estimate i collects a rollout of max(batch_size, n_steps) transitions on
// stream derive_seed(seed, {i}), normalizes advantages over it the way the
// trainer does and takes the gradient on batch_size transitions drawn without
// replacement. With batch_size == samples and i == 0 this is exactly the
// oracle of the same seed.
std::vector<LossGradients> estimate_all_terms(const GradContext& ctx, std::int64_t batch_size,
                                              int n_estimates, std::uint64_t seed,
                                              int workers = 1);
std::vector<LossGradients> estimate_all_terms(const Checkpoint& ckpt, std::int64_t batch_size,
                                              int n_estimates, std::uint64_t seed,
                                              int workers = 1);
std::vector<FlatParams> estimate_gradients(const Checkpoint& ckpt, LossTerm term,
                                           std::int64_t batch_size, int n_estimates,
                                           std::uint64_t seed, int workers = 1);

struct CosineStats {
  double mean = 0.0;
  double std = 0.0;  // population
  int n = 0;
  int degenerate = 0;
};

CosineStats cosine_stats(const std::vector<double>& values, int degenerate);

// Mean cosine between independent pairs of batch_size estimates.
CosineStats pairwise_consistency(const Checkpoint& ckpt, LossTerm term, std::int64_t batch_size,
                                 int n_pairs, std::uint64_t seed, int workers = 1);

struct GradQualityRecord {
  std::string checkpoint;
  std::int64_t env_step = 0;
  std::int64_t gradient_step = 0;
  LossTerm term = LossTerm::Total;
  std::int64_t batch_size = 0;
  CosineStats cos;
  double oracle_norm = 0.0;  // 0 under AllPairs
};

// Records ordered by env step, then term, then batch size. Checkpoint k uses
// oracle seed derive_seed(cfg.seed, {k, 0}) and estimate seed
// derive_seed(cfg.seed, {k, 1, batch_size}).
std::vector<GradQualityRecord> analyze_run(const std::vector<Checkpoint>& series,
                                           const GradSimConfig& cfg);

// Columns: checkpoint, env_step, gradient_step, term, batch_size, mean_cos,
// std_cos, n, oracle_norm.
CsvTable records_table(const std::vector<GradQualityRecord>& records);

}  // namespace actlab
