#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "actlab/loss.hpp"

namespace actlab {

// Defaults follow the common PPO reference configuration (n_steps 2048,
// minibatch 64, 10 epochs, lr 3e-4, clip 0.2, gamma 0.99, lambda 0.95).
struct PpoConfig {
  int n_steps = 2048;
  int minibatch_size = 64;
  int epochs = 10;
  double clip = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double vf_coef = 0.5;
  double ent_coef = 0.0;
  double learning_rate = 3e-4;
  double max_grad_norm = 0.5;
  std::int64_t total_env_steps = 1'000'000;
  // Accurate-gradient mode: every gradient step uses one fresh batch of this
  // many transitions and the learning curve is indexed by gradient steps.
  std::optional<std::int64_t> gradient_batch_override;
  int checkpoint_count = 20;
  int eval_episodes = 20;
  int eval_every = 1;  // iterations between evaluation points
  bool normalize_observations = false;
  std::vector<std::size_t> hidden{64, 64};
  int workers = 1;

  void validate() const;
  LossConfig loss() const { return {clip, vf_coef, ent_coef}; }
  bool accurate_mode() const { return gradient_batch_override.has_value(); }
  // Transitions collected per iteration.
  std::int64_t rollout_length() const;
  // Iterations (rollouts, or gradient steps in accurate mode).
  std::int64_t iterations() const;
};

}  // namespace actlab
