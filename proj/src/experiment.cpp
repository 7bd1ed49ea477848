#include "actlab/experiment.hpp"

#include <cstdlib>
#include <fstream>

#include "actlab/csv.hpp"
#include "actlab/error.hpp"

namespace actlab {

using nlohmann::json;

void ExperimentConfig::validate() const {
  if (name.empty() || name.find('/') != std::string::npos || name == "." || name == "..")
    throw ConfigError("experiment: name must be a plain directory name");
  if (modes.empty()) throw ConfigError("experiment: at least one actuation mode is required");
  for (std::size_t i = 0; i < modes.size(); ++i) run_config(i).validate();
  for (std::size_t i = 0; i < modes.size(); ++i)
    for (std::size_t k = i + 1; k < modes.size(); ++k)
      if (modes[i].kind == modes[k].kind)
        throw ConfigError("experiment: actuation mode '" + std::string(to_string(modes[i].kind)) +
                          "' is listed twice");
  landscape.validate();
  gradsim.validate();
  if (seeds.empty()) throw ConfigError("experiment: seeds must not be empty");
  if (output_root.empty()) throw ConfigError("experiment: output_root must not be empty");
}

RunConfig ExperimentConfig::run_config(std::size_t mode_index) const {
  RunConfig r;
  r.env = env;
  r.actuation = modes.at(mode_index);
  r.ppo = ppo;
  return r;
}

ExperimentConfig ExperimentConfig::single(std::size_t mode_index, std::uint64_t seed) const {
  ExperimentConfig c = *this;
  c.modes = {modes.at(mode_index)};
  c.seeds = {seed};
  return c;
}

std::filesystem::path ExperimentConfig::run_dir(std::size_t mode_index, std::uint64_t seed) const {
  return std::filesystem::path(output_root) / name / std::string(to_string(modes.at(mode_index).kind)) /
         ("seed_" + std::to_string(seed));
}

void ExperimentConfig::set_workers(int workers) {
  if (workers < 1) throw ConfigError("workers must be >= 1");
  ppo.workers = workers;
  landscape.workers = workers;
  gradsim.workers = workers;
}

namespace {

bool has(const json& j, const char* section, const char* key) {
  return j.contains(section) && j[section].is_object() && j[section].contains(key);
}

}  // namespace

ExperimentConfig experiment_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"name", "env", "actuation", "ppo", "landscape", "gradsim", "seeds",
                       "output_root", "desk_scale", "accurate_gradients"},
                      "experiment");
  ExperimentConfig c;
  try {
    c.name = j.value("name", c.name);
    c.desk_scale = j.value("desk_scale", c.desk_scale);
    c.accurate_gradients = j.value("accurate_gradients", c.accurate_gradients);
    c.output_root = j.value("output_root", c.output_root);
    if (j.contains("seeds")) {
      if (j["seeds"].is_string()) c.seeds = parse_seed_set(j["seeds"].get<std::string>());
      else c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment: ") + e.what());
  }
  c.env = env_config_from_json(j.value("env", json::object()));

  json act = j.value("actuation", json::object());
  if (act.is_object()) act = json::array({act});
  if (!act.is_array()) throw ConfigError("experiment: actuation must be an object or an array");
  for (const auto& a : act) c.modes.push_back(actuation_from_json(a, c.env.spec));

  json ppo = j.value("ppo", json::object());
  const std::int64_t steps = c.desk_scale ? DeskScale::total_env_steps : FullScale::total_env_steps;
  const std::int64_t batch = c.desk_scale ? DeskScale::accurate_batch : FullScale::accurate_batch;
  if (!has(j, "ppo", "total_env_steps")) ppo["total_env_steps"] = steps;
  if (c.accurate_gradients && (!has(j, "ppo", "gradient_batch_override") ||
                               j["ppo"]["gradient_batch_override"].is_null()))
    ppo["gradient_batch_override"] = batch;
  c.ppo = ppo_config_from_json(ppo);

  json land = j.value("landscape", json::object());
  if (!has(j, "landscape", "samples_per_cell"))
    land["samples_per_cell"] = c.desk_scale ? DeskScale::samples_per_cell : FullScale::samples_per_cell;
  c.landscape = landscape_config_from_json(land);

  json grad = j.value("gradsim", json::object());
  if (!has(j, "gradsim", "oracle_samples"))
    grad["oracle_samples"] = c.desk_scale ? DeskScale::oracle_samples : FullScale::oracle_samples;
  c.gradsim = gradsim_config_from_json(grad);

  for (std::size_t i = 0; i < c.modes.size(); ++i) {
    RunConfig r = c.run_config(i);
    resolve_gains(r);
    c.modes[i] = r.actuation;
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return experiment_from_json(j);
}

json to_json(const ExperimentConfig& c) {
  json modes = json::array();
  for (const auto& m : c.modes) modes.push_back(to_json(m));
  json j = {{"name", c.name},
            {"env", to_json(c.env)},
            {"actuation", modes},
            {"ppo", to_json(c.ppo)},
            {"landscape", to_json(c.landscape)},
            {"gradsim", to_json(c.gradsim)},
            {"seeds", c.seeds},
            {"output_root", c.output_root},
            {"desk_scale", c.desk_scale},
            {"accurate_gradients", c.accurate_gradients}};
  // Workers never change results, so they stay out of snapshots.
  j["ppo"].erase("workers");
  return j;
}

std::vector<std::uint64_t> parse_seed_set(const std::string& text) {
  std::vector<std::uint64_t> out;
  auto parse = [&](const std::string& s) -> std::uint64_t {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (s.empty() || pos != s.size() || s[0] == '-') throw ConfigError("invalid seed '" + s + "'");
    return v;
  };
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    const std::string part = text.substr(start, end - start);
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse(part));
    } else {
      const auto lo = parse(part.substr(0, dots)), hi = parse(part.substr(dots + 2));
      if (hi < lo) throw ConfigError("invalid seed range '" + part + "'");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    }
    start = end + 1;
  }
  if (out.empty()) throw ConfigError("empty seed set");
  return out;
}

std::string resolve_output_root(const std::string& configured) {
  if (const char* env = std::getenv("ACTLAB_OUTPUT_ROOT"); env && *env) return env;
  return configured;
}

}  // namespace actlab
