#pragma once

#include <json.hpp>
#include <string>

#include "actlab/actuation.hpp"
#include "actlab/envs.hpp"
#include "actlab/policy.hpp"
#include "actlab/ppo_config.hpp"

namespace actlab {

// Everything a single training run needs. Serialized verbatim into every
// checkpoint so analyses reload the exact environment and actuation.
struct RunConfig {
  EnvConfig env;
  ActuationMode actuation;
  PpoConfig ppo;

  void validate() const;
  PolicySpec policy_spec() const;
  TaskFactory task_factory() const;
};

// JSON conversion. Readers reject unknown keys and fill unset fields with
// defaults; writers emit every field.
nlohmann::json to_json(const EnvConfig& c);
nlohmann::json to_json(const ActuationMode& m);
nlohmann::json to_json(const PpoConfig& c);
nlohmann::json to_json(const RunConfig& c);

EnvConfig env_config_from_json(const nlohmann::json& j);
PpoConfig ppo_config_from_json(const nlohmann::json& j);
RunConfig run_config_from_json(const nlohmann::json& j);

// Actuation section as written by users: kind, optional gains (scalars are
// broadcast to every joint) and optional bounds. Missing bounds get the
// defaults for the kind; missing gains stay empty for the caller to resolve.
ActuationMode actuation_from_json(const nlohmann::json& j, const EnvSpec& spec);

// Throws ConfigError naming the first key of `j` not listed in `allowed`.
void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                         const std::string& section);

// Canonical text used for config snapshots and checkpoints.
std::string canonical_dump(const nlohmann::json& j);

}  // namespace actlab

namespace actlab {

// Fills missing velocity/position gains by running tune_gains over the
// default grid (seed 0, one environment horizon per episode). Gains already
// present are kept. Returns true if anything was tuned.
bool resolve_gains(RunConfig& config);

}  // namespace actlab
