#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "actlab/config.hpp"
#include "actlab/gradsim.hpp"
#include "actlab/landscape.hpp"

namespace actlab {

// Reduced sample counts applied to unset fields when desk_scale is on.
struct DeskScale {
  static constexpr std::int64_t samples_per_cell = 4'000;
  static constexpr std::int64_t oracle_samples = 200'000;
  static constexpr std::int64_t accurate_batch = 10'000;
  static constexpr std::int64_t total_env_steps = 150'000;
};

struct FullScale {
  static constexpr std::int64_t samples_per_cell = 200'000;
  static constexpr std::int64_t oracle_samples = 10'000'000;
  static constexpr std::int64_t accurate_batch = 100'000;
  static constexpr std::int64_t total_env_steps = 1'000'000;
};

struct ExperimentConfig {
  std::string name = "experiment";
  EnvConfig env;
  std::vector<ActuationMode> modes;
  PpoConfig ppo;
  LandscapeConfig landscape;
  GradSimConfig gradsim;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::string output_root = "runs";
  bool desk_scale = true;
  // Accurate-gradient training; sets gradient_batch_override when unset.
  bool accurate_gradients = false;

  void validate() const;
  RunConfig run_config(std::size_t mode_index) const;
  // Same experiment restricted to one mode and one seed.
  ExperimentConfig single(std::size_t mode_index, std::uint64_t seed) const;
  std::filesystem::path run_dir(std::size_t mode_index, std::uint64_t seed) const;
  // Applies the worker bound to every compute stage.
  void set_workers(int workers);
};

// Parses, applies scale defaults, resolves missing controller gains and
// validates. Unknown keys are rejected.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);
// Fully expanded form; reading it back yields the same configuration.
nlohmann::json to_json(const ExperimentConfig& c);

// "0..9", "3", "0,2,5" or combinations such as "0..2,7".
std::vector<std::uint64_t> parse_seed_set(const std::string& text);

// ACTLAB_OUTPUT_ROOT wins over the configured root when set.
std::string resolve_output_root(const std::string& configured);

}  // namespace actlab
