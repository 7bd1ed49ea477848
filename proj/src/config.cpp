#include "actlab/config.hpp"

#include <cmath>

#include "actlab/error.hpp"

namespace actlab {

using nlohmann::json;

namespace {

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(section + "." + key + ": " + e.what());
  }
}

Vec read_per_joint(const json& j, std::size_t dof, const std::string& what) {
  if (j.is_number()) return Vec(dof, j.get<double>());
  if (j.is_array()) {
    Vec v = j.get<Vec>();
    if (v.size() != dof) throw ConfigError(what + ": expected " + std::to_string(dof) + " entries");
    return v;
  }
  throw ConfigError(what + ": expected a number or an array");
}

}  // namespace

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& section) {
  if (!j.is_object()) throw ConfigError(section + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(section + ": unknown key '" + it.key() + "'");
  }
}

std::string canonical_dump(const json& j) { return j.dump(2); }

void PpoConfig::validate() const {
  if (n_steps < 1 || minibatch_size < 1 || epochs < 1)
    throw ConfigError("ppo: n_steps, minibatch_size and epochs must be >= 1");
  if (n_steps % minibatch_size != 0) throw ConfigError("ppo: minibatch_size must divide n_steps");
  if (!(clip > 0.0 && clip < 1.0)) throw ConfigError("ppo: clip must lie in (0, 1)");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("ppo: gamma must lie in (0, 1)");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("ppo: gae_lambda must lie in [0, 1]");
  if (!(learning_rate > 0.0)) throw ConfigError("ppo: learning_rate must be > 0");
  if (vf_coef < 0.0 || ent_coef < 0.0) throw ConfigError("ppo: loss coefficients must be >= 0");
  if (total_env_steps < 0) throw ConfigError("ppo: total_env_steps must be >= 0");
  if (gradient_batch_override && *gradient_batch_override < 1)
    throw ConfigError("ppo: gradient_batch_override must be >= 1");
  if (checkpoint_count < 0) throw ConfigError("ppo: checkpoint_count must be >= 0");
  if (eval_episodes < 1 || eval_every < 1) throw ConfigError("ppo: eval_episodes and eval_every must be >= 1");
  if (normalize_observations)
    throw ConfigError("ppo: observation normalization is not available; set normalize_observations to false");
  for (std::size_t h : hidden)
    if (h == 0) throw ConfigError("ppo: hidden widths must be >= 1");
  if (workers < 1) throw ConfigError("ppo: workers must be >= 1");
}

std::int64_t PpoConfig::rollout_length() const {
  return gradient_batch_override ? *gradient_batch_override : n_steps;
}

std::int64_t PpoConfig::iterations() const {
  const std::int64_t len = rollout_length();
  return (total_env_steps + len - 1) / len;
}

void RunConfig::validate() const {
  env.spec.validate();
  actuation.validate(env.spec);
  ppo.validate();
}

PolicySpec RunConfig::policy_spec() const {
  auto env_ptr = make_environment(env);
  return {env_ptr->observation_dim(), env.spec.dof, ppo.hidden};
}

TaskFactory RunConfig::task_factory() const {
  return [env = env, mode = actuation]() { return ActuatedEnv(make_environment(env), mode); };
}

json to_json(const EnvConfig& c) {
  json spec = {{"dof", c.spec.dof},         {"dt", c.spec.dt},
               {"torque_limit", c.spec.torque_limit}, {"horizon", c.spec.horizon},
               {"gamma", c.spec.gamma}};
  if (c.spec.joint_limits) spec["joint_limits"] = *c.spec.joint_limits;
  json j = {{"id", c.id}, {"spec", spec}};
  if (c.id == "pendulum") {
    j["pendulum"] = {{"gravity", c.pendulum.gravity},
                     {"mass", c.pendulum.mass},
                     {"length", c.pendulum.length},
                     {"max_speed", c.pendulum.max_speed}};
  } else {
    j["reacher"] = {{"link1", c.reacher.link1},       {"link2", c.reacher.link2},
                    {"inertia1", c.reacher.inertia1}, {"inertia2", c.reacher.inertia2},
                    {"damping", c.reacher.damping}};
  }
  return j;
}

EnvConfig env_config_from_json(const json& j) {
  reject_unknown_keys(j, {"id", "spec", "pendulum", "reacher"}, "env");
  std::string id = "pendulum";
  read(j, "id", id, "env");
  EnvConfig c = default_env_config(id);
  if (j.contains("spec")) {
    const json& s = j["spec"];
    reject_unknown_keys(s, {"dof", "dt", "torque_limit", "joint_limits", "horizon", "gamma"},
                        "env.spec");
    read(s, "dof", c.spec.dof, "env.spec");
    read(s, "dt", c.spec.dt, "env.spec");
    read(s, "horizon", c.spec.horizon, "env.spec");
    read(s, "gamma", c.spec.gamma, "env.spec");
    if (s.contains("torque_limit"))
      c.spec.torque_limit = read_per_joint(s["torque_limit"], c.spec.dof, "env.spec.torque_limit");
    if (s.contains("joint_limits") && !s["joint_limits"].is_null())
      c.spec.joint_limits = s["joint_limits"].get<std::vector<std::array<double, 2>>>();
  }
  if (j.contains("pendulum")) {
    const json& p = j["pendulum"];
    reject_unknown_keys(p, {"gravity", "mass", "length", "max_speed"}, "env.pendulum");
    read(p, "gravity", c.pendulum.gravity, "env.pendulum");
    read(p, "mass", c.pendulum.mass, "env.pendulum");
    read(p, "length", c.pendulum.length, "env.pendulum");
    read(p, "max_speed", c.pendulum.max_speed, "env.pendulum");
  }
  if (j.contains("reacher")) {
    const json& p = j["reacher"];
    reject_unknown_keys(p, {"link1", "link2", "inertia1", "inertia2", "damping"}, "env.reacher");
    read(p, "link1", c.reacher.link1, "env.reacher");
    read(p, "link2", c.reacher.link2, "env.reacher");
    read(p, "inertia1", c.reacher.inertia1, "env.reacher");
    read(p, "inertia2", c.reacher.inertia2, "env.reacher");
    read(p, "damping", c.reacher.damping, "env.reacher");
  }
  c.spec.validate();
  return c;
}

json to_json(const ActuationMode& m) {
  json gains = json::object();
  if (!m.gains.kd_vc.empty()) gains["kd_vc"] = m.gains.kd_vc;
  if (!m.gains.kp_pc.empty()) gains["kp_pc"] = m.gains.kp_pc;
  if (!m.gains.kd_pc.empty()) gains["kd_pc"] = m.gains.kd_pc;
  return {{"mode", std::string(to_string(m.kind))},
          {"gains", gains},
          {"bounds", {{"low", m.bounds.low}, {"high", m.bounds.high}}}};
}

ActuationMode actuation_from_json(const json& j, const EnvSpec& spec) {
  reject_unknown_keys(j, {"mode", "gains", "bounds"}, "actuation");
  ActuationMode m;
  std::string mode = "torque";
  read(j, "mode", mode, "actuation");
  m.kind = parse_actuation_kind(mode);
  m.bounds = default_action_bounds(m.kind, spec);
  if (j.contains("gains")) {
    const json& g = j["gains"];
    reject_unknown_keys(g, {"kd_vc", "kp_pc", "kd_pc"}, "actuation.gains");
    if (g.contains("kd_vc")) m.gains.kd_vc = read_per_joint(g["kd_vc"], spec.dof, "actuation.gains.kd_vc");
    if (g.contains("kp_pc")) m.gains.kp_pc = read_per_joint(g["kp_pc"], spec.dof, "actuation.gains.kp_pc");
    if (g.contains("kd_pc")) m.gains.kd_pc = read_per_joint(g["kd_pc"], spec.dof, "actuation.gains.kd_pc");
  }
  if (j.contains("bounds")) {
    const json& b = j["bounds"];
    reject_unknown_keys(b, {"low", "high"}, "actuation.bounds");
    if (b.contains("low")) m.bounds.low = read_per_joint(b["low"], spec.dof, "actuation.bounds.low");
    if (b.contains("high")) m.bounds.high = read_per_joint(b["high"], spec.dof, "actuation.bounds.high");
  }
  return m;
}

json to_json(const PpoConfig& c) {
  json j = {{"n_steps", c.n_steps},
            {"minibatch_size", c.minibatch_size},
            {"epochs", c.epochs},
            {"clip", c.clip},
            {"gamma", c.gamma},
            {"gae_lambda", c.gae_lambda},
            {"vf_coef", c.vf_coef},
            {"ent_coef", c.ent_coef},
            {"learning_rate", c.learning_rate},
            {"max_grad_norm", c.max_grad_norm},
            {"total_env_steps", c.total_env_steps},
            {"checkpoint_count", c.checkpoint_count},
            {"eval_episodes", c.eval_episodes},
            {"eval_every", c.eval_every},
            {"normalize_observations", c.normalize_observations},
            {"hidden", c.hidden},
            {"workers", c.workers}};
  j["gradient_batch_override"] =
      c.gradient_batch_override ? json(*c.gradient_batch_override) : json(nullptr);
  return j;
}

PpoConfig ppo_config_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"n_steps", "minibatch_size", "epochs", "clip", "gamma", "gae_lambda",
                       "vf_coef", "ent_coef", "learning_rate", "max_grad_norm", "total_env_steps",
                       "gradient_batch_override", "checkpoint_count", "eval_episodes",
                       "eval_every", "normalize_observations", "hidden", "workers"},
                      "ppo");
  PpoConfig c;
  const std::string s = "ppo";
  read(j, "n_steps", c.n_steps, s);
  read(j, "minibatch_size", c.minibatch_size, s);
  read(j, "epochs", c.epochs, s);
  read(j, "clip", c.clip, s);
  read(j, "gamma", c.gamma, s);
  read(j, "gae_lambda", c.gae_lambda, s);
  read(j, "vf_coef", c.vf_coef, s);
  read(j, "ent_coef", c.ent_coef, s);
  read(j, "learning_rate", c.learning_rate, s);
  read(j, "max_grad_norm", c.max_grad_norm, s);
  read(j, "total_env_steps", c.total_env_steps, s);
  read(j, "checkpoint_count", c.checkpoint_count, s);
  read(j, "eval_episodes", c.eval_episodes, s);
  read(j, "eval_every", c.eval_every, s);
  read(j, "normalize_observations", c.normalize_observations, s);
  read(j, "hidden", c.hidden, s);
  read(j, "workers", c.workers, s);
  if (j.contains("gradient_batch_override") && !j["gradient_batch_override"].is_null())
    c.gradient_batch_override = j["gradient_batch_override"].get<std::int64_t>();
  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  return {{"env", to_json(c.env)}, {"actuation", to_json(c.actuation)}, {"ppo", to_json(c.ppo)}};
}

RunConfig run_config_from_json(const json& j) {
  reject_unknown_keys(j, {"env", "actuation", "ppo"}, "run");
  RunConfig c;
  c.env = env_config_from_json(j.value("env", json::object()));
  c.actuation = actuation_from_json(j.value("actuation", json::object()), c.env.spec);
  c.ppo = ppo_config_from_json(j.value("ppo", json::object()));
  c.validate();
  return c;
}

}  // namespace actlab

namespace actlab {

bool resolve_gains(RunConfig& config) {
  ActuationMode& m = config.actuation;
  const bool need = (m.kind == ActuationKind::Velocity && m.gains.kd_vc.empty()) ||
                    (m.kind == ActuationKind::Position &&
                     (m.gains.kp_pc.empty() || m.gains.kd_pc.empty()));
  if (!need) return false;
  const auto proto = make_environment(config.env);
  const auto result = tune_gains(*proto, m.kind, m.bounds, default_gain_grid(m.kind, config.env.spec.dof),
                                 config.env.spec.horizon, 0);
  m.gains = result.best;
  return true;
}

}  // namespace actlab
