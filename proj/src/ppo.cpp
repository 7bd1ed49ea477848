#include "actlab/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "actlab/adam.hpp"
#include "actlab/csv.hpp"
#include "actlab/error.hpp"

namespace actlab {

namespace {

// Stream identifiers under the run seed.
enum : std::uint64_t { kInit = 1, kAction = 2, kShuffle = 3, kReset = 4, kEval = 5, kInitialBuffer = 6 };

}  // namespace

std::vector<std::int64_t> checkpoint_schedule(std::int64_t iterations, int count) {
  std::vector<std::int64_t> out;
  if (iterations <= 0) return out;
  for (int k = 1; k <= count; ++k) {
    const std::int64_t r = (k * iterations + count) / (count + 1);  // ceil(k R / (count+1))
    if (r >= 1 && r < iterations && (out.empty() || out.back() < r)) out.push_back(r);
  }
  out.push_back(iterations);
  return out;
}

EpisodeStats evaluate_policy(const FlatParams& params, const PolicySpec& spec,
                             const TaskFactory& factory, int episodes, std::uint64_t seed,
                             double gamma) {
  return run_episodes(params, spec, factory, static_cast<std::size_t>(episodes),
                      derive_seed(seed, {kEval}), ActionSelection::Deterministic, gamma);
}

EpisodeStats evaluate_random(const PolicySpec& spec, const TaskFactory& factory, int episodes,
                             std::uint64_t seed, double gamma) {
  const FlatParams zeros = FlatParams::zeros(spec.layout());
  return run_episodes(zeros, spec, factory, static_cast<std::size_t>(episodes),
                      derive_seed(seed, {kEval}), ActionSelection::Uniform, gamma);
}

Trainer::Trainer(RunConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      config_json_(canonical_dump(to_json(config_))),
      spec_(config_.policy_spec()),
      factory_(config_.task_factory()),
      task_(factory_()),
      seed_(seed),
      rng_action_(derive_seed(seed, {kAction})),
      rng_shuffle_(derive_seed(seed, {kShuffle})) {
  config_.validate();
  Rng init(derive_seed(seed, {kInit}));
  params_ = init_params(spec_, init);
  obs_ = task_.reset(derive_seed(seed_, {kReset, 0}));
  // Buffer for loss surfaces of the untrained policy, from its own stream.
  const auto traj = collect_transitions(params_, spec_, factory_,
                                        static_cast<std::size_t>(config_.ppo.rollout_length()),
                                        derive_seed(seed, {kInitialBuffer}));
  frozen_ = make_batch(traj, config_.ppo.gamma, config_.ppo.gae_lambda);
  if (!done()) evaluate();
}

Trainer::Trainer(const Checkpoint& c)
    : config_(c.config()),
      config_json_(c.config_json),
      spec_(config_.policy_spec()),
      factory_(config_.task_factory()),
      task_(factory_()),
      seed_(c.seed),
      iteration_(c.iteration),
      env_step_(c.env_step),
      gradient_step_(c.gradient_step),
      episode_index_(c.episode_index),
      episode_step_(c.episode_step),
      params_(c.params),
      adam_(c.adam),
      rng_action_(c.rng_action),
      rng_shuffle_(c.rng_shuffle),
      obs_(c.last_observation),
      curve_(c.curve),
      frozen_(c.frozen) {
  if (!params_.same_layout(FlatParams::zeros(spec_.layout())))
    throw ConfigError("checkpoint parameters do not match its configuration");
  if (obs_.size() != spec_.obs_dim) throw ConfigError("checkpoint observation has wrong size");
  task_.env().restore(c.env);
}

bool Trainer::eval_due(std::int64_t it) const {
  return it % config_.ppo.eval_every == 0 || it == iterations();
}

void Trainer::evaluate() {
  const auto stats = evaluate_policy(params_, spec_, factory_, config_.ppo.eval_episodes, seed_,
                                     config_.env.spec.gamma);
  curve_.push_back({seed_, env_step_, gradient_step_, stats.mean_return(), stats.std_return(),
                    stats.mean_discounted()});
}

Batch Trainer::rollout(std::int64_t n) {
  const std::size_t od = spec_.obs_dim, ad = spec_.act_dim;
  const int horizon = config_.env.spec.horizon;
  const auto log_std = params_.block("log_std");
  Trajectory traj;
  traj.obs_dim = od;
  traj.act_dim = ad;
  std::vector<double> bootstrap;  // V(s') at each transition that ends a segment
  for (std::int64_t i = 0; i < n; ++i) {
    const Eigen::Map<const Matrix> x(obs_.data(), static_cast<Eigen::Index>(od), 1);
    const Matrix mean = mlp_forward(params_, "pi", spec_.policy_net(), x);
    const double value = mlp_forward(params_, "vf", spec_.value_net(), x)(0, 0);
    const std::span<const double> mu(mean.data(), ad);
    const ActionSample a = sample_action(mu, log_std, rng_action_);
    ActuatedEnv::StepOut out;
    try {
      out = task_.step(a.clipped);
    } catch (const NumericError& e) {
      Batch partial;
      partial.obs_dim = od;
      partial.act_dim = ad;
      partial.observations = traj.observations;
      partial.actions = traj.actions;
      partial.old_log_probs = traj.log_probs;
      partial.old_values = traj.values;
      partial.advantages.assign(traj.size(), std::numeric_limits<double>::quiet_NaN());
      partial.returns = partial.advantages;
      abort_numeric(std::string("environment step failed: ") + e.what(), partial);
    }
    traj.append(obs_, a.raw, out.torque, out.reward, log_prob(mu, log_std, a.raw), value);
    obs_ = out.observation;
    ++env_step_;
    const bool episode_over = ++episode_step_ >= horizon;
    if (episode_over || i + 1 == n) {
      const Eigen::Map<const Matrix> xn(obs_.data(), static_cast<Eigen::Index>(od), 1);
      traj.next_values.back() = mlp_forward(params_, "vf", spec_.value_net(), xn)(0, 0);
      traj.episode_end.back() = 1;
    }
    if (episode_over) {
      ++episode_index_;
      episode_step_ = 0;
      obs_ = task_.reset(derive_seed(seed_, {kReset, static_cast<std::uint64_t>(episode_index_)}));
    }
  }
  for (std::size_t t = 0; t + 1 < traj.size(); ++t)
    if (!traj.episode_end[t]) traj.next_values[t] = traj.values[t + 1];
  Batch batch = make_batch(traj, config_.ppo.gamma, config_.ppo.gae_lambda);
  for (const Vec* v : {&batch.observations, &batch.actions, &batch.old_log_probs, &batch.advantages,
                       &batch.returns, &batch.old_values})
    for (double x : *v)
      if (!std::isfinite(x)) abort_numeric("non-finite value in collected rollout", batch);
  return batch;
}

void Trainer::optimize(const Batch& batch) {
  const LossConfig loss = config_.ppo.loss();
  auto step = [&](const Batch& b) {
    const LossGradients g = ppo_loss_grad(b, params_, spec_, loss, config_.ppo.workers);
    FlatParams grad = g.total(loss);
    if (!std::isfinite(g.loss.total) || !all_finite(grad))
      abort_numeric("non-finite loss or gradient", b);
    adam_step(params_, std::move(grad), adam_, config_.ppo.learning_rate,
              config_.ppo.max_grad_norm);
    if (!all_finite(params_)) abort_numeric("non-finite parameters after update", b);
    ++gradient_step_;
  };
  if (config_.ppo.accurate_mode()) {
    step(batch);
    return;
  }
  const std::size_t n = batch.size();
  const std::size_t mb = static_cast<std::size_t>(config_.ppo.minibatch_size);
  std::vector<std::size_t> perm(n);
  for (int epoch = 0; epoch < config_.ppo.epochs; ++epoch) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng_shuffle_.index(i)]);
    for (std::size_t start = 0; start + mb <= n; start += mb)
      step(batch.select(std::span<const std::size_t>(perm.data() + start, mb)));
  }
}

void Trainer::run_iteration() {
  if (done()) throw ConfigError("training run is already complete");
  Batch batch = rollout(config_.ppo.rollout_length());
  optimize(batch);
  frozen_ = std::move(batch);
  ++iteration_;
  if (eval_due(iteration_)) evaluate();
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.config_json = config_json_;
  c.seed = seed_;
  c.iteration = iteration_;
  c.env_step = env_step_;
  c.gradient_step = gradient_step_;
  c.episode_index = episode_index_;
  c.episode_step = episode_step_;
  c.params = params_;
  c.adam = adam_;
  c.rng_action = rng_action_;
  c.rng_shuffle = rng_shuffle_;
  c.env = task_.env().snapshot();
  c.last_observation = obs_;
  c.curve = curve_;
  c.frozen = frozen_;
  c.stored_loss = ppo_loss(frozen_, params_, spec_, config_.ppo.loss(), config_.ppo.workers);
  return c;
}

void Trainer::abort_numeric(const std::string& what, const Batch& batch) const {
  CsvTable t;
  for (std::size_t i = 0; i < batch.obs_dim; ++i) t.header.push_back("obs_" + std::to_string(i));
  for (std::size_t i = 0; i < batch.act_dim; ++i) t.header.push_back("action_" + std::to_string(i));
  for (const char* h : {"old_log_prob", "advantage", "return", "old_value"}) t.header.push_back(h);
  for (std::size_t s = 0; s < batch.size(); ++s) {
    std::vector<std::string> row;
    for (std::size_t i = 0; i < batch.obs_dim; ++i)
      row.push_back(format_double(batch.observations[s * batch.obs_dim + i]));
    for (std::size_t i = 0; i < batch.act_dim; ++i)
      row.push_back(format_double(batch.actions[s * batch.act_dim + i]));
    for (double v : {batch.old_log_probs[s], batch.advantages[s], batch.returns[s], batch.old_values[s]})
      row.push_back(format_double(v));
    t.add_row(std::move(row));
  }
  const auto path = (dump_dir_.empty() ? std::filesystem::path(".") : dump_dir_) /
                    ("nan_dump_seed" + std::to_string(seed_) + "_iter" +
                     std::to_string(iteration_) + ".csv");
  std::string where = path.string();
  try {
    write_csv(path, t);
  } catch (const std::exception& e) {
    where = std::string("<dump failed: ") + e.what() + ">";
  }
  throw NumericError(what + " at iteration " + std::to_string(iteration_) + ", env step " +
                     std::to_string(env_step_) + "; batch dumped to " + where);
}

namespace {

TrainResult run_to_end(Trainer& t, const TrainOptions& options) {
  TrainResult result;
  t.set_dump_dir(options.dump_dir);
  const auto schedule = checkpoint_schedule(t.iterations(), t.config().ppo.checkpoint_count);
  if (t.done()) {
    result.final = t.checkpoint();
    result.curve = t.curve();
    return result;
  }
  while (!t.done()) {
    t.run_iteration();
    if (!std::binary_search(schedule.begin(), schedule.end(), t.iteration())) continue;
    Checkpoint c = t.checkpoint();
    if (options.sink) options.sink(c);
    if (t.done()) {
      if (options.keep_series) result.series.push_back(c);
      result.final = std::move(c);
    } else if (options.keep_series) {
      result.series.push_back(std::move(c));
    }
  }
  result.curve = t.curve();
  return result;
}

}  // namespace

TrainResult train(const RunConfig& config, std::uint64_t seed, const TrainOptions& options) {
  Trainer t(config, seed);
  return run_to_end(t, options);
}

TrainResult resume(const Checkpoint& ckpt, const TrainOptions& options) {
  Trainer t(ckpt);
  return run_to_end(t, options);
}

}  // namespace actlab
