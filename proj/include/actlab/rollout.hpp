#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "actlab/actuation.hpp"
#include "actlab/loss.hpp"
#include "actlab/policy.hpp"

namespace actlab {

// Transitions in collection order. episode_end marks the last transition of an
// episode or of a truncated segment; next_values holds V(s') for every
// transition, so time-limit ends bootstrap from the value function.
struct Trajectory {
  std::size_t obs_dim = 0;
  std::size_t act_dim = 0;
  Vec observations;
  Vec actions;  // raw (unclipped) policy samples
  Vec torques;  // applied torques
  Vec rewards;
  Vec log_probs;
  Vec values;
  Vec next_values;
  std::vector<std::uint8_t> episode_end;

  std::size_t size() const { return rewards.size(); }
  void append(std::span<const double> obs, std::span<const double> action,
              std::span<const double> torque, double reward, double log_prob, double value);
};

struct GaeResult {
  Vec advantages;
  Vec returns;
};

// Single segment ending in a bootstrap value:
//   delta_t = r_t + gamma V(s_{t+1}) - V(s_t),  A_t = sum_k (gamma lambda)^k delta_{t+k}.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      double last_value, double gamma, double lambda);

// General form: the trace is cut after every transition flagged in `ends`.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const double> next_values,
                      std::span<const std::uint8_t> ends, double gamma, double lambda);

// In place: mean 0, population std 1 (std floored at 1e-8).
void normalize_advantages(Vec& advantages);

Batch make_batch(const Trajectory& traj, double gamma, double lambda, bool normalize = true);

enum class ActionSelection { Stochastic, Deterministic, Uniform };

struct EpisodeStats {
  Vec returns;             // undiscounted, one per episode
  Vec discounted_returns;  // sum_t gamma^t r_t
  std::int64_t steps = 0;

  double mean_return() const;
  double std_return() const;
  double mean_discounted() const;
  // Standard error of mean_discounted().
  double discounted_standard_error() const;
};

// Episodes of `horizon` steps; episode e draws its reset seed and action
// noise from streams derived from (stream, e), so statistics do not depend on
// how episodes are grouped. Episodes step in lockstep groups so the policy
// forward pass is batched.
EpisodeStats run_episodes(const FlatParams& params, const PolicySpec& spec,
                          const TaskFactory& factory, std::size_t n_episodes,
                          std::uint64_t stream, ActionSelection selection, double gamma);

// Whole episodes from fresh resets, concatenated in episode order and cut to
// exactly n_transitions (the final partial episode bootstraps from V).
Trajectory collect_transitions(const FlatParams& params, const PolicySpec& spec,
                               const TaskFactory& factory, std::size_t n_transitions,
                               std::uint64_t stream);

}  // namespace actlab
