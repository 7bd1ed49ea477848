#include "actlab/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "actlab/error.hpp"
#include "actlab/rng.hpp"

namespace actlab {

namespace {

constexpr std::size_t kEpisodeGroup = 32;

double action_value(ActionSelection sel, double mean, double log_std, Rng& rng) {
  switch (sel) {
    case ActionSelection::Stochastic: return mean + std::exp(log_std) * rng.normal();
    case ActionSelection::Deterministic: return mean;
    case ActionSelection::Uniform: return rng.uniform(-1.0, 1.0);
  }
  return mean;
}

struct EpisodeRecord {
  Vec observations, actions, torques, rewards, log_probs, values, next_values;
};

// Steps a group of episodes in lockstep. Each episode owns its environment
// and noise stream.
template <typename OnStep>
void run_group(const FlatParams& params, const PolicySpec& spec, const TaskFactory& factory,
               std::size_t first, std::size_t count, std::uint64_t stream,
               ActionSelection selection, bool need_values, OnStep&& on_step) {
  std::vector<ActuatedEnv> tasks;
  std::vector<Rng> noise;
  tasks.reserve(count);
  noise.reserve(count);
  const std::size_t od = spec.obs_dim, ad = spec.act_dim;
  Matrix obs(od, count);
  for (std::size_t g = 0; g < count; ++g) {
    const auto e = static_cast<std::uint64_t>(first + g);
    tasks.push_back(factory());
    if (tasks.back().observation_dim() != od || tasks.back().action_dim() != ad)
      throw ConfigError("task dimensions do not match the policy");
    noise.emplace_back(derive_seed(stream, {e, 1}));
    const Vec o = tasks.back().reset(derive_seed(stream, {e, 0}));
    std::copy(o.begin(), o.end(), obs.col(g).data());
  }
  const int horizon = tasks.front().env().spec().horizon;
  const auto log_std = params.block("log_std");
  Vec raw(ad), clipped(ad);
  for (int t = 0; t < horizon; ++t) {
    const Matrix mean = mlp_forward(params, "pi", spec.policy_net(), obs);
    Matrix values;
    if (need_values) values = mlp_forward(params, "vf", spec.value_net(), obs);
    for (std::size_t g = 0; g < count; ++g) {
      for (std::size_t i = 0; i < ad; ++i) {
        raw[i] = action_value(selection, mean(i, g), log_std[i], noise[g]);
        clipped[i] = std::clamp(raw[i], -1.0, 1.0);
      }
      auto out = tasks[g].step(clipped);
      const double lp =
          need_values ? log_prob(std::span<const double>(mean.col(g).data(), ad), log_std, raw)
                      : 0.0;
      on_step(g, t, std::span<const double>(obs.col(g).data(), od), raw, out,
              need_values ? values(0, g) : 0.0, lp);
      std::copy(out.observation.begin(), out.observation.end(), obs.col(g).data());
    }
  }
  if (need_values) {
    const Matrix last = mlp_forward(params, "vf", spec.value_net(), obs);
    for (std::size_t g = 0; g < count; ++g)
      on_step(g, horizon, std::span<const double>(obs.col(g).data(), od), raw,
              ActuatedEnv::StepOut{}, last(0, g), 0.0);
  }
}

}  // namespace

void Trajectory::append(std::span<const double> obs, std::span<const double> action,
                        std::span<const double> torque, double reward, double log_prob,
                        double value) {
  observations.insert(observations.end(), obs.begin(), obs.end());
  actions.insert(actions.end(), action.begin(), action.end());
  torques.insert(torques.end(), torque.begin(), torque.end());
  rewards.push_back(reward);
  log_probs.push_back(log_prob);
  values.push_back(value);
  next_values.push_back(0.0);
  episode_end.push_back(0);
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      double last_value, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  Vec next(n);
  for (std::size_t t = 0; t < n; ++t) next[t] = t + 1 < n ? values[t + 1] : last_value;
  std::vector<std::uint8_t> ends(n, 0);
  if (n > 0) ends[n - 1] = 1;
  return compute_gae(rewards, values, next, ends, gamma, lambda);
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const double> next_values,
                      std::span<const std::uint8_t> ends, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || next_values.size() != n || ends.size() != n)
    throw ConfigError("compute_gae: arrays are not aligned");
  GaeResult r;
  r.advantages.assign(n, 0.0);
  r.returns.assign(n, 0.0);
  double acc = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double delta = rewards[t] + gamma * next_values[t] - values[t];
    acc = delta + (ends[t] ? 0.0 : gamma * lambda * acc);
    r.advantages[t] = acc;
    r.returns[t] = acc + values[t];
  }
  return r;
}

void normalize_advantages(Vec& advantages) {
  const std::size_t n = advantages.size();
  if (n == 0) return;
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  var /= static_cast<double>(n);
  const double sd = std::max(std::sqrt(var), 1e-8);
  for (double& a : advantages) a = (a - mean) / sd;
}

Batch make_batch(const Trajectory& traj, double gamma, double lambda, bool normalize) {
  auto gae = compute_gae(traj.rewards, traj.values, traj.next_values, traj.episode_end, gamma,
                         lambda);
  Batch b;
  b.obs_dim = traj.obs_dim;
  b.act_dim = traj.act_dim;
  b.observations = traj.observations;
  b.actions = traj.actions;
  b.old_log_probs = traj.log_probs;
  b.old_values = traj.values;
  b.returns = std::move(gae.returns);
  b.advantages = std::move(gae.advantages);
  if (normalize) normalize_advantages(b.advantages);
  return b;
}

double EpisodeStats::mean_return() const {
  if (returns.empty()) return 0.0;
  return std::accumulate(returns.begin(), returns.end(), 0.0) / static_cast<double>(returns.size());
}

double EpisodeStats::std_return() const {
  if (returns.empty()) return 0.0;
  const double m = mean_return();
  double s = 0.0;
  for (double r : returns) s += (r - m) * (r - m);
  return std::sqrt(s / static_cast<double>(returns.size()));
}

double EpisodeStats::mean_discounted() const {
  if (discounted_returns.empty()) return 0.0;
  return std::accumulate(discounted_returns.begin(), discounted_returns.end(), 0.0) /
         static_cast<double>(discounted_returns.size());
}

double EpisodeStats::discounted_standard_error() const {
  const std::size_t n = discounted_returns.size();
  if (n < 2) return 0.0;
  const double m = mean_discounted();
  double s = 0.0;
  for (double r : discounted_returns) s += (r - m) * (r - m);
  return std::sqrt(s / static_cast<double>(n - 1) / static_cast<double>(n));
}

EpisodeStats run_episodes(const FlatParams& params, const PolicySpec& spec,
                          const TaskFactory& factory, std::size_t n_episodes,
                          std::uint64_t stream, ActionSelection selection, double gamma) {
  EpisodeStats stats;
  stats.returns.assign(n_episodes, 0.0);
  stats.discounted_returns.assign(n_episodes, 0.0);
  for (std::size_t first = 0; first < n_episodes; first += kEpisodeGroup) {
    const std::size_t count = std::min(kEpisodeGroup, n_episodes - first);
    Vec discount(count, 1.0);
    run_group(params, spec, factory, first, count, stream, selection, false,
              [&](std::size_t g, int, std::span<const double>, std::span<const double>,
                  const ActuatedEnv::StepOut& out, double, double) {
                stats.returns[first + g] += out.reward;
                stats.discounted_returns[first + g] += discount[g] * out.reward;
                discount[g] *= gamma;
                ++stats.steps;
              });
  }
  return stats;
}

Trajectory collect_transitions(const FlatParams& params, const PolicySpec& spec,
                               const TaskFactory& factory, std::size_t n_transitions,
                               std::uint64_t stream) {
  Trajectory traj;
  traj.obs_dim = spec.obs_dim;
  traj.act_dim = spec.act_dim;
  if (n_transitions == 0) return traj;
  const int horizon = factory().env().spec().horizon;
  const std::size_t n_episodes = (n_transitions + horizon - 1) / horizon;
  for (std::size_t first = 0; first < n_episodes; first += kEpisodeGroup) {
    const std::size_t count = std::min(kEpisodeGroup, n_episodes - first);
    std::vector<EpisodeRecord> rec(count);
    run_group(params, spec, factory, first, count, stream, ActionSelection::Stochastic, true,
              [&](std::size_t g, int t, std::span<const double> obs, std::span<const double> raw,
                  const ActuatedEnv::StepOut& out, double value, double lp) {
                EpisodeRecord& r = rec[g];
                if (t > 0) r.next_values.push_back(value);
                if (t == horizon) return;
                r.observations.insert(r.observations.end(), obs.begin(), obs.end());
                r.actions.insert(r.actions.end(), raw.begin(), raw.end());
                r.torques.insert(r.torques.end(), out.torque.begin(), out.torque.end());
                r.rewards.push_back(out.reward);
                r.log_probs.push_back(lp);
                r.values.push_back(value);
              });
    for (std::size_t g = 0; g < count && traj.size() < n_transitions; ++g) {
      const EpisodeRecord& r = rec[g];
      const std::size_t keep = std::min<std::size_t>(horizon, n_transitions - traj.size());
      for (std::size_t t = 0; t < keep; ++t) {
        traj.append(std::span<const double>(r.observations.data() + t * spec.obs_dim, spec.obs_dim),
                    std::span<const double>(r.actions.data() + t * spec.act_dim, spec.act_dim),
                    std::span<const double>(r.torques.data() + t * spec.act_dim, spec.act_dim),
                    r.rewards[t], r.log_probs[t], r.values[t]);
        traj.next_values.back() = r.next_values[t];
      }
      traj.episode_end.back() = 1;
    }
  }
  return traj;
}

}  // namespace actlab
