#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace actlab {

using Vec = std::vector<double>;

struct JointState {
  Vec q;     // joint angles (rad)
  Vec qdot;  // joint velocities (rad/s)

  bool operator==(const JointState&) const = default;
};

struct EnvSpec {
  std::size_t dof = 1;
  double dt = 0.05;
  Vec torque_limit{2.0};
  // Per-joint [min, max]; unset means unlimited revolute joints.
  std::optional<std::vector<std::array<double, 2>>> joint_limits;
  int horizon = 200;
  double gamma = 0.99;

  void validate() const;
};

struct RewardBounds {
  double low;
  double high;
};

struct PendulumParams {
  double gravity = 10.0;
  double mass = 1.0;
  double length = 1.0;
  double max_speed = 8.0;
};

struct ReacherParams {
  double link1 = 0.1;
  double link2 = 0.1;
  double inertia1 = 0.01;
  double inertia2 = 0.01;
  double damping = 0.1;
};

// Wraps to [-pi, pi]; wrap_angle(wrap_angle(x)) == wrap_angle(x).
double wrap_angle(double x);

struct StepResult {
  JointState state;
  Vec observation;
  double reward;
};

// Rewards are computed from the state the action is applied in together with
// the applied torque; observations describe the state after the step.

// Frictionless pendulum, theta = 0 upright:
//   theta_ddot = 3g/(2l) sin(theta) + 3/(m l^2) tau, semi-implicit Euler.
// Observation (cos theta, sin theta, theta_dot).
StepResult pendulum_step(const JointState& state, double torque,
                         const EnvSpec& spec, const PendulumParams& p = {});

std::array<double, 2> fingertip(std::span<const double> q, const ReacherParams& p);

// Planar two-link arm with decoupled damped joints:
//   q_ddot_i = (tau_i - c q_dot_i) / I_i.
// Observation (cos q, sin q, q_dot, target, fingertip - target).
StepResult reacher_step(const JointState& state, std::span<const double> torques,
                        const EnvSpec& spec, const ReacherParams& p,
                        std::array<double, 2> target);

// Same dynamics; target given in joint space.
// Observation (q, q_target, q_dot, wrap(q_target - q)); reward -||(2/pi) dq||.
StepResult joint_space_reacher_step(const JointState& state,
                                    std::span<const double> torques,
                                    const EnvSpec& spec, const ReacherParams& p,
                                    std::span<const double> q_target);

double joint_space_reward(std::span<const double> q, std::span<const double> q_target);

struct Transition {
  Vec observation;
  double reward;
};

// Complete mutable state of an environment instance.
struct EnvSnapshot {
  JointState state;
  Vec aux;  // environment-specific (targets)

  bool operator==(const EnvSnapshot&) const = default;
};

// Engine-agnostic stepping interface. Instances are single-owner state
// machines; there is no shared mutable state between instances.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string_view id() const = 0;
  virtual const EnvSpec& spec() const = 0;
  virtual std::size_t observation_dim() const = 0;
  virtual std::string observation_layout() const = 0;
  virtual RewardBounds reward_bounds() const = 0;

  // Draws the initial state from a stream derived from `seed`.
  virtual Vec reset(std::uint64_t seed) = 0;
  virtual Transition step(std::span<const double> torque) = 0;

  // Direct state override used by ideal position control.
  virtual bool supports_state_override() const { return false; }
  virtual Transition step_to(const JointState& target);

  virtual const JointState& joint_state() const = 0;
  virtual Vec observation() const = 0;
  virtual EnvSnapshot snapshot() const = 0;
  virtual void restore(const EnvSnapshot& snap) = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
};

struct EnvConfig {
  std::string id = "pendulum";  // pendulum | reacher | joint_reacher
  EnvSpec spec;
  PendulumParams pendulum;
  ReacherParams reacher;
};

EnvSpec default_env_spec(std::string_view id);
EnvConfig default_env_config(std::string_view id);
std::unique_ptr<Environment> make_environment(const EnvConfig& config);

}  // namespace actlab
