#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "actlab/adam.hpp"
#include "actlab/config.hpp"
#include "actlab/envs.hpp"
#include "actlab/loss.hpp"
#include "actlab/policy.hpp"
#include "actlab/rng.hpp"

namespace actlab {

struct CurvePoint {
  std::uint64_t seed = 0;
  std::int64_t env_step = 0;
  std::int64_t gradient_step = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
  double discounted_return = 0.0;

  bool operator==(const CurvePoint&) const = default;
};

// Complete resumable training state.
struct Checkpoint {
  std::string config_json;  // canonical RunConfig text
  std::uint64_t seed = 0;
  std::int64_t iteration = 0;
  std::int64_t env_step = 0;
  std::int64_t gradient_step = 0;
  std::int64_t episode_index = 0;
  std::int64_t episode_step = 0;
  FlatParams params;
  AdamState adam;
  Rng rng_action;
  Rng rng_shuffle;
  EnvSnapshot env;
  Vec last_observation;
  std::vector<CurvePoint> curve;
  // Last rollout before the snapshot; loss surfaces are evaluated on it.
  Batch frozen;
  // ppo_loss(frozen, params) at save time.
  LossTerms stored_loss;

  RunConfig config() const;
  std::string id() const { return "ckpt_" + std::to_string(env_step); }
  bool operator==(const Checkpoint&) const = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Checkpoint& ckpt);
// Throws CorruptFileError, VersionMismatchError or TruncatedFileError.
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Checkpoint files of a run directory sorted by env step.
std::vector<std::filesystem::path> list_checkpoints(const std::filesystem::path& run_dir);

}  // namespace actlab
