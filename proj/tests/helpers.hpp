#pragma once

#include <filesystem>
#include <string>

#include "actlab/config.hpp"
#include "actlab/ppo.hpp"

namespace testing_support {

// Small pendulum torque-control run that trains in well under a second.
inline actlab::RunConfig tiny_config(std::int64_t steps = 512, const char* env = "pendulum") {
  actlab::RunConfig c;
  c.env = actlab::default_env_config(env);
  c.actuation.kind = actlab::ActuationKind::Torque;
  c.actuation.bounds = actlab::default_action_bounds(actlab::ActuationKind::Torque, c.env.spec);
  c.ppo.n_steps = 128;
  c.ppo.minibatch_size = 32;
  c.ppo.epochs = 2;
  c.ppo.hidden = {16, 16};
  c.ppo.total_env_steps = steps;
  c.ppo.checkpoint_count = 3;
  c.ppo.eval_episodes = 2;
  return c;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("actlab_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing_support
