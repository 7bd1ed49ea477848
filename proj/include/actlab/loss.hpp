#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "actlab/policy.hpp"

namespace actlab {

// Aligned per-sample training data; observations and actions are stored
// sample-major (sample i occupies [i*dim, (i+1)*dim)).
struct Batch {
  std::size_t obs_dim = 0;
  std::size_t act_dim = 0;
  Vec observations;
  Vec actions;  // unclipped samples
  Vec old_log_probs;
  Vec advantages;
  Vec returns;
  Vec old_values;

  std::size_t size() const { return old_log_probs.size(); }
  bool empty() const { return old_log_probs.empty(); }
  Batch select(std::span<const std::size_t> indices) const;
  void validate() const;
  bool operator==(const Batch&) const = default;
};

struct LossConfig {
  double clip = 0.2;
  double vf_coef = 0.5;
  double ent_coef = 0.0;
};

// total = policy + vf_coef * value - ent_coef * entropy
struct LossTerms {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;

  bool operator==(const LossTerms&) const = default;
};

// Gradients of each term separately; the policy term touches only "pi.*" and
// log_std, the value term only "vf.*".
struct LossGradients {
  LossTerms loss;
  FlatParams policy;
  FlatParams value;
  FlatParams entropy;

  FlatParams total(const LossConfig& cfg) const;
};

// Samples per shard. Shards are reduced in index order, so results do not
// depend on the number of workers.
inline constexpr std::size_t kShardSize = 256;

LossTerms ppo_loss(const Batch& batch, const FlatParams& params, const PolicySpec& spec,
                   const LossConfig& cfg, int workers = 1);

// Batched Eigen kernel, shards evaluated in parallel with OpenMP.
LossGradients ppo_loss_grad(const Batch& batch, const FlatParams& params,
                            const PolicySpec& spec, const LossConfig& cfg, int workers = 1);

namespace reference {

// One sample at a time with plain loops. Kept as the serial reference for
// the parallel kernel.
LossGradients ppo_loss_grad(const Batch& batch, const FlatParams& params,
                            const PolicySpec& spec, const LossConfig& cfg);

}  // namespace reference

}  // namespace actlab
