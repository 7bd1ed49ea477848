#include "actlab/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "actlab/error.hpp"
#include "actlab/rng.hpp"

namespace actlab {

namespace {

constexpr double kPi = std::numbers::pi;

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw NumericError(std::string(what) + " contains a non-finite value");
}

void check_state(const JointState& s, const EnvSpec& spec) {
  if (s.q.size() != spec.dof || s.qdot.size() != spec.dof)
    throw ConfigError("joint state has wrong dimension");
  require_finite(s.q, "joint positions");
  require_finite(s.qdot, "joint velocities");
}

double clamp_torque(double tau, double limit) { return std::clamp(tau, -limit, limit); }

// Position update shared by all environments: wrap for unlimited revolute
// joints, clamp and stop at a limit otherwise.
void integrate_position(JointState& s, const EnvSpec& spec) {
  for (std::size_t i = 0; i < spec.dof; ++i) {
    double q = s.q[i] + spec.dt * s.qdot[i];
    if (spec.joint_limits) {
      const auto [lo, hi] = (*spec.joint_limits)[i];
      if (q < lo || q > hi) {
        q = std::clamp(q, lo, hi);
        s.qdot[i] = 0.0;
      }
    } else {
      q = wrap_angle(q);
    }
    s.q[i] = q;
  }
}

Vec pendulum_observation(const JointState& s) {
  return {std::cos(s.q[0]), std::sin(s.q[0]), s.qdot[0]};
}

Vec reacher_observation(const JointState& s, const ReacherParams& p,
                        std::array<double, 2> target) {
  const auto tip = fingertip(s.q, p);
  return {std::cos(s.q[0]), std::sin(s.q[0]), std::cos(s.q[1]), std::sin(s.q[1]),
          s.qdot[0],        s.qdot[1],        target[0],        target[1],
          tip[0] - target[0], tip[1] - target[1]};
}

Vec joint_reacher_observation(const JointState& s, std::span<const double> q_target) {
  Vec obs;
  obs.reserve(4 * s.q.size());
  obs.insert(obs.end(), s.q.begin(), s.q.end());
  obs.insert(obs.end(), q_target.begin(), q_target.end());
  obs.insert(obs.end(), s.qdot.begin(), s.qdot.end());
  for (std::size_t i = 0; i < s.q.size(); ++i) obs.push_back(wrap_angle(q_target[i] - s.q[i]));
  return obs;
}

// Damped decoupled joints shared by both reacher variants.
JointState arm_dynamics(const JointState& state, std::span<const double> tau,
                        const EnvSpec& spec, const ReacherParams& p) {
  JointState next = state;
  const double inertia[2] = {p.inertia1, p.inertia2};
  for (std::size_t i = 0; i < 2; ++i)
    next.qdot[i] = state.qdot[i] + spec.dt * (tau[i] - p.damping * state.qdot[i]) / inertia[i];
  integrate_position(next, spec);
  return next;
}

Vec clamp_torques(std::span<const double> torques, const EnvSpec& spec) {
  if (torques.size() != spec.dof) throw ConfigError("torque vector has wrong dimension");
  require_finite(torques, "torque");
  Vec u(spec.dof);
  for (std::size_t i = 0; i < spec.dof; ++i) u[i] = clamp_torque(torques[i], spec.torque_limit[i]);
  return u;
}

class PendulumEnv final : public Environment {
 public:
  PendulumEnv(EnvSpec spec, PendulumParams params) : spec_(std::move(spec)), params_(params) {
    state_ = {{kPi}, {0.0}};
  }

  std::string_view id() const override { return "pendulum"; }
  const EnvSpec& spec() const override { return spec_; }
  std::size_t observation_dim() const override { return 3; }
  std::string observation_layout() const override {
    return "cos(theta), sin(theta), theta_dot";
  }
  RewardBounds reward_bounds() const override {
    const double lim = spec_.torque_limit[0];
    return {-(kPi * kPi + 0.1 * params_.max_speed * params_.max_speed + 0.001 * lim * lim), 0.0};
  }

  // theta ~ U(-pi, pi), theta_dot ~ U(-1, 1).
  Vec reset(std::uint64_t seed) override {
    Rng rng(derive_seed(seed, {0x70656e64}));
    state_.q = {rng.uniform(-kPi, kPi)};
    state_.qdot = {rng.uniform(-1.0, 1.0)};
    return observation();
  }

  Transition step(std::span<const double> torque) override {
    if (torque.size() != 1) throw ConfigError("pendulum expects one torque");
    auto r = pendulum_step(state_, torque[0], spec_, params_);
    state_ = std::move(r.state);
    return {std::move(r.observation), r.reward};
  }

  const JointState& joint_state() const override { return state_; }
  Vec observation() const override { return pendulum_observation(state_); }
  EnvSnapshot snapshot() const override { return {state_, {}}; }
  void restore(const EnvSnapshot& snap) override {
    check_state(snap.state, spec_);
    state_ = snap.state;
  }
  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<PendulumEnv>(*this);
  }

 private:
  EnvSpec spec_;
  PendulumParams params_;
  JointState state_;
};

class ReacherEnv final : public Environment {
 public:
  ReacherEnv(EnvSpec spec, ReacherParams params) : spec_(std::move(spec)), params_(params) {
    state_ = {{0.0, 0.0}, {0.0, 0.0}};
    target_ = {params_.link1 + params_.link2, 0.0};
  }

  std::string_view id() const override { return "reacher"; }
  const EnvSpec& spec() const override { return spec_; }
  std::size_t observation_dim() const override { return 10; }
  std::string observation_layout() const override {
    return "cos(q1), sin(q1), cos(q2), sin(q2), q1_dot, q2_dot, target_x, target_y, "
           "tip_x - target_x, tip_y - target_y";
  }
  RewardBounds reward_bounds() const override {
    double ctrl = 0.0;
    for (double l : spec_.torque_limit) ctrl += l * l;
    return {-(2.0 * (params_.link1 + params_.link2) + 0.001 * ctrl), 0.0};
  }

  // q ~ U(-0.1, 0.1), q_dot ~ U(-0.005, 0.005), target uniform by area in the
  // reachable annulus |l1 - l2| <= r <= l1 + l2.
  Vec reset(std::uint64_t seed) override {
    Rng rng(derive_seed(seed, {0x72656163}));
    for (std::size_t i = 0; i < 2; ++i) {
      state_.q[i] = rng.uniform(-0.1, 0.1);
      state_.qdot[i] = rng.uniform(-0.005, 0.005);
    }
    const double r_min = std::abs(params_.link1 - params_.link2);
    const double r_max = params_.link1 + params_.link2;
    const double r = std::sqrt(rng.uniform(r_min * r_min, r_max * r_max));
    const double phi = rng.uniform(-kPi, kPi);
    target_ = {r * std::cos(phi), r * std::sin(phi)};
    return observation();
  }

  Transition step(std::span<const double> torque) override {
    auto r = reacher_step(state_, torque, spec_, params_, target_);
    state_ = std::move(r.state);
    return {std::move(r.observation), r.reward};
  }

  bool supports_state_override() const override { return true; }
  Transition step_to(const JointState& target) override {
    check_state(target, spec_);
    const Vec zero(2, 0.0);
    const double reward = reacher_step(state_, zero, spec_, params_, target_).reward;
    state_.q = {wrap_angle(target.q[0]), wrap_angle(target.q[1])};
    state_.qdot = target.qdot;
    return {observation(), reward};
  }

  const JointState& joint_state() const override { return state_; }
  Vec observation() const override { return reacher_observation(state_, params_, target_); }
  EnvSnapshot snapshot() const override { return {state_, {target_[0], target_[1]}}; }
  void restore(const EnvSnapshot& snap) override {
    check_state(snap.state, spec_);
    if (snap.aux.size() != 2) throw ConfigError("reacher snapshot needs a 2-d target");
    state_ = snap.state;
    target_ = {snap.aux[0], snap.aux[1]};
  }
  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<ReacherEnv>(*this);
  }

 private:
  EnvSpec spec_;
  ReacherParams params_;
  JointState state_;
  std::array<double, 2> target_;
};

class JointReacherEnv final : public Environment {
 public:
  JointReacherEnv(EnvSpec spec, ReacherParams params) : spec_(std::move(spec)), params_(params) {
    state_ = {{0.0, 0.0}, {0.0, 0.0}};
    target_ = {0.0, 0.0};
  }

  std::string_view id() const override { return "joint_reacher"; }
  const EnvSpec& spec() const override { return spec_; }
  std::size_t observation_dim() const override { return 8; }
  std::string observation_layout() const override {
    return "q1, q2, q1_target, q2_target, q1_dot, q2_dot, dq1_target, dq2_target";
  }
  RewardBounds reward_bounds() const override {
    return {-2.0 * std::sqrt(static_cast<double>(spec_.dof)), 0.0};
  }

  // q ~ U(-0.1, 0.1), q_dot ~ U(-0.005, 0.005), q_target ~ U(-pi, pi).
  Vec reset(std::uint64_t seed) override {
    Rng rng(derive_seed(seed, {0x6a6f696e}));
    for (std::size_t i = 0; i < 2; ++i) {
      state_.q[i] = rng.uniform(-0.1, 0.1);
      state_.qdot[i] = rng.uniform(-0.005, 0.005);
    }
    for (std::size_t i = 0; i < 2; ++i) target_[i] = rng.uniform(-kPi, kPi);
    return observation();
  }

  Transition step(std::span<const double> torque) override {
    auto r = joint_space_reacher_step(state_, torque, spec_, params_, target_);
    state_ = std::move(r.state);
    return {std::move(r.observation), r.reward};
  }

  bool supports_state_override() const override { return true; }
  Transition step_to(const JointState& target) override {
    check_state(target, spec_);
    const double reward = joint_space_reward(state_.q, target_);
    state_.q = {wrap_angle(target.q[0]), wrap_angle(target.q[1])};
    state_.qdot = target.qdot;
    return {observation(), reward};
  }

  const JointState& joint_state() const override { return state_; }
  Vec observation() const override { return joint_reacher_observation(state_, target_); }
  EnvSnapshot snapshot() const override { return {state_, target_}; }
  void restore(const EnvSnapshot& snap) override {
    check_state(snap.state, spec_);
    if (snap.aux.size() != 2) throw ConfigError("joint reacher snapshot needs a 2-d target");
    state_ = snap.state;
    target_ = snap.aux;
  }
  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<JointReacherEnv>(*this);
  }

 private:
  EnvSpec spec_;
  ReacherParams params_;
  JointState state_;
  Vec target_;
};

}  // namespace

void EnvSpec::validate() const {
  if (dof == 0) throw ConfigError("env: dof must be >= 1");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("env: dt must be > 0");
  if (horizon < 1) throw ConfigError("env: horizon must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("env: gamma must lie in (0, 1)");
  if (torque_limit.size() != dof) throw ConfigError("env: torque_limit needs one entry per joint");
  for (double l : torque_limit)
    if (!(l > 0.0) || !std::isfinite(l)) throw ConfigError("env: torque limits must be > 0");
  if (joint_limits) {
    if (joint_limits->size() != dof) throw ConfigError("env: joint_limits needs one entry per joint");
    for (const auto& [lo, hi] : *joint_limits)
      if (!(lo < hi)) throw ConfigError("env: joint limit min must be < max");
  }
}

double wrap_angle(double x) {
  if (x >= -kPi && x <= kPi) return x;
  double y = std::remainder(x, 2.0 * kPi);
  if (y < -kPi) y += 2.0 * kPi;
  if (y > kPi) y -= 2.0 * kPi;
  return y;
}

StepResult pendulum_step(const JointState& state, double torque, const EnvSpec& spec,
                         const PendulumParams& p) {
  if (spec.dof != 1) throw ConfigError("pendulum spec must have dof 1");
  check_state(state, spec);
  if (!std::isfinite(torque)) throw NumericError("torque is not finite");
  const double u = clamp_torque(torque, spec.torque_limit[0]);
  const double th = state.q[0];
  const double thdot = state.qdot[0];
  const double thw = wrap_angle(th);
  const double reward = -(thw * thw + 0.1 * thdot * thdot + 0.001 * u * u);

  const double accel = 3.0 * p.gravity / (2.0 * p.length) * std::sin(th) +
                       3.0 / (p.mass * p.length * p.length) * u;
  JointState next = state;
  next.qdot[0] = std::clamp(thdot + accel * spec.dt, -p.max_speed, p.max_speed);
  integrate_position(next, spec);
  Vec obs = pendulum_observation(next);
  return {std::move(next), std::move(obs), reward};
}

std::array<double, 2> fingertip(std::span<const double> q, const ReacherParams& p) {
  return {p.link1 * std::cos(q[0]) + p.link2 * std::cos(q[0] + q[1]),
          p.link1 * std::sin(q[0]) + p.link2 * std::sin(q[0] + q[1])};
}

StepResult reacher_step(const JointState& state, std::span<const double> torques,
                        const EnvSpec& spec, const ReacherParams& p,
                        std::array<double, 2> target) {
  if (spec.dof != 2) throw ConfigError("reacher spec must have dof 2");
  check_state(state, spec);
  require_finite(target, "target");
  const Vec u = clamp_torques(torques, spec);
  const auto tip = fingertip(state.q, p);
  const double dist = std::hypot(tip[0] - target[0], tip[1] - target[1]);
  const double reward = -dist - 0.001 * (u[0] * u[0] + u[1] * u[1]);
  JointState next = arm_dynamics(state, u, spec, p);
  Vec obs = reacher_observation(next, p, target);
  return {std::move(next), std::move(obs), reward};
}

double joint_space_reward(std::span<const double> q, std::span<const double> q_target) {
  double sq = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double d = (2.0 / kPi) * wrap_angle(q_target[i] - q[i]);
    sq += d * d;
  }
  return -std::sqrt(sq);
}

StepResult joint_space_reacher_step(const JointState& state, std::span<const double> torques,
                                    const EnvSpec& spec, const ReacherParams& p,
                                    std::span<const double> q_target) {
  if (spec.dof != 2) throw ConfigError("joint reacher spec must have dof 2");
  if (q_target.size() != spec.dof) throw ConfigError("q_target has wrong dimension");
  check_state(state, spec);
  require_finite(q_target, "q_target");
  const Vec u = clamp_torques(torques, spec);
  const double reward = joint_space_reward(state.q, q_target);
  JointState next = arm_dynamics(state, u, spec, p);
  Vec obs = joint_reacher_observation(next, q_target);
  return {std::move(next), std::move(obs), reward};
}

Transition Environment::step_to(const JointState&) {
  throw ConfigError("environment '" + std::string(id()) + "' does not support state override");
}

EnvSpec default_env_spec(std::string_view id) {
  EnvSpec spec;
  if (id == "pendulum") {
    spec.dof = 1;
    spec.dt = 0.05;
    spec.torque_limit = {2.0};
  } else if (id == "reacher" || id == "joint_reacher") {
    spec.dof = 2;
    spec.dt = 0.02;
    spec.torque_limit = {1.0, 1.0};
  } else {
    throw ConfigError("unknown environment id '" + std::string(id) + "'");
  }
  spec.horizon = 200;
  spec.gamma = 0.99;
  return spec;
}

EnvConfig default_env_config(std::string_view id) {
  EnvConfig cfg;
  cfg.id = std::string(id);
  cfg.spec = default_env_spec(id);
  return cfg;
}

std::unique_ptr<Environment> make_environment(const EnvConfig& config) {
  config.spec.validate();
  const auto expected = default_env_spec(config.id);
  if (config.spec.dof != expected.dof)
    throw ConfigError("environment '" + config.id + "' requires dof " + std::to_string(expected.dof));
  if (config.id == "pendulum") return std::make_unique<PendulumEnv>(config.spec, config.pendulum);
  if (config.id == "reacher") return std::make_unique<ReacherEnv>(config.spec, config.reacher);
  return std::make_unique<JointReacherEnv>(config.spec, config.reacher);
}

}  // namespace actlab
