#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "actlab/checkpoint.hpp"
#include "actlab/config.hpp"
#include "actlab/rollout.hpp"

namespace actlab {

// Iterations after which a series checkpoint is taken: `count` evenly spaced
// indices ceil(k R / (count + 1)) plus the final iteration R, deduplicated and
// strictly increasing. Empty when R == 0.
std::vector<std::int64_t> checkpoint_schedule(std::int64_t iterations, int count);

// Deterministic-mean evaluation on the fixed evaluation stream of `seed`.
EpisodeStats evaluate_policy(const FlatParams& params, const PolicySpec& spec,
                             const TaskFactory& factory, int episodes, std::uint64_t seed,
                             double gamma);

// Uniform random actions on the same evaluation episodes.
EpisodeStats evaluate_random(const PolicySpec& spec, const TaskFactory& factory, int episodes,
                             std::uint64_t seed, double gamma);

using CheckpointSink = std::function<void(const Checkpoint&)>;

struct TrainOptions {
  CheckpointSink sink;                    // called for every series checkpoint
  std::filesystem::path dump_dir;         // NaN dumps go here (empty: current dir)
  bool keep_series = true;                // keep series checkpoints in the result
};

struct TrainResult {
  Checkpoint final;
  std::vector<CurvePoint> curve;
  std::vector<Checkpoint> series;
};

// Single-environment PPO. One iteration collects rollout_length() transitions
// and either runs `epochs` passes of shuffled minibatches or, in accurate
// mode, one gradient step on the whole batch.
class Trainer {
 public:
  Trainer(RunConfig config, std::uint64_t seed);
  explicit Trainer(const Checkpoint& ckpt);

  std::int64_t iteration() const { return iteration_; }
  std::int64_t iterations() const { return config_.ppo.iterations(); }
  bool done() const { return iteration_ >= iterations(); }

  // Collects a rollout and optimizes on it. Evaluates afterwards when due.
  void run_iteration();
  Checkpoint checkpoint() const;

  const std::vector<CurvePoint>& curve() const { return curve_; }
  const FlatParams& params() const { return params_; }
  const RunConfig& config() const { return config_; }
  const PolicySpec& policy_spec() const { return spec_; }
  void set_dump_dir(std::filesystem::path dir) { dump_dir_ = std::move(dir); }

 private:
  Batch rollout(std::int64_t n);
  void optimize(const Batch& batch);
  void evaluate();
  bool eval_due(std::int64_t it) const;
  [[noreturn]] void abort_numeric(const std::string& what, const Batch& batch) const;

  RunConfig config_;
  std::string config_json_;
  PolicySpec spec_;
  TaskFactory factory_;
  ActuatedEnv task_;
  std::uint64_t seed_;
  std::int64_t iteration_ = 0;
  std::int64_t env_step_ = 0;
  std::int64_t gradient_step_ = 0;
  std::int64_t episode_index_ = 0;
  std::int64_t episode_step_ = 0;
  FlatParams params_;
  AdamState adam_;
  Rng rng_action_;
  Rng rng_shuffle_;
  Vec obs_;
  std::vector<CurvePoint> curve_;
  Batch frozen_;
  std::filesystem::path dump_dir_;
};

TrainResult train(const RunConfig& config, std::uint64_t seed, const TrainOptions& options = {});
// Continues a checkpoint to the end of its configured run.
TrainResult resume(const Checkpoint& ckpt, const TrainOptions& options = {});

}  // namespace actlab
