#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "actlab/envs.hpp"

namespace actlab {

enum class ActuationKind { Torque, Velocity, Position, IdealPosition };

std::string_view to_string(ActuationKind kind);
ActuationKind parse_actuation_kind(std::string_view name);

// Per-joint gains. Only the entries used by the selected kind must be set.
struct ControllerGains {
  Vec kd_vc;  // velocity control, N m s / rad
  Vec kp_pc;  // position control, N m / rad
  Vec kd_pc;  // position control damping, N m s / rad

  bool operator==(const ControllerGains&) const = default;
};

// Action range in the mode's native units. Policy actions in [-1, 1] map
// affinely onto [low, high].
struct ActionBounds {
  Vec low;
  Vec high;

  bool operator==(const ActionBounds&) const = default;
};

struct ActuationMode {
  ActuationKind kind = ActuationKind::Torque;
  ControllerGains gains;
  ActionBounds bounds;

  void validate(const EnvSpec& spec) const;
};

// Clips a to [-1, 1] and rescales onto the bounds.
Vec affine_rescale(std::span<const double> a, const ActionBounds& bounds);

Vec apply_torque(std::span<const double> a, const ActionBounds& bounds);

// tau = kd_vc (v - q_dot), clamped to the torque limit after the control law.
Vec apply_velocity_control(std::span<const double> a, const JointState& state,
                           const ControllerGains& gains, const ActionBounds& bounds,
                           std::span<const double> torque_limit);

// tau = kp_pc (p - q) - kd_pc q_dot with zero target velocity. The position
// error is angle-wrapped for unlimited revolute joints.
Vec apply_position_control(std::span<const double> a, const JointState& state,
                           const ControllerGains& gains, const ActionBounds& bounds,
                           std::span<const double> torque_limit, bool wrap_error = true);

// q = target, q_dot = 0. No torque is computed.
JointState apply_ideal_position(std::span<const double> a, const ActionBounds& bounds);

// Torque: +-torque_limit. Position: joint limits or [-pi, pi].
// Velocity: +-2 (joint range) / (horizon dt).
ActionBounds default_action_bounds(ActuationKind kind, const EnvSpec& spec);

// An environment behind an action representation. Exactly one controller
// evaluation happens per policy step.
class ActuatedEnv {
 public:
  struct StepOut {
    Vec observation;
    double reward;
    Vec torque;  // applied torque (zeros under ideal position control)
  };

  ActuatedEnv(std::unique_ptr<Environment> env, ActuationMode mode);

  Vec reset(std::uint64_t seed) { return env_->reset(seed); }
  StepOut step(std::span<const double> action);

  Environment& env() { return *env_; }
  const Environment& env() const { return *env_; }
  const ActuationMode& mode() const { return mode_; }
  std::size_t action_dim() const { return env_->spec().dof; }
  std::size_t observation_dim() const { return env_->observation_dim(); }

 private:
  std::unique_ptr<Environment> env_;
  ActuationMode mode_;
};

using TaskFactory = std::function<ActuatedEnv()>;

struct GainScore {
  ControllerGains gains;
  double error;
};

struct TuneResult {
  ControllerGains best;
  double best_error;
  std::vector<GainScore> table;  // in grid order
};

// Seven log-spaced values in [1e-2, 1e2] per gain (7 candidates for velocity
// control, 49 (kp, kd) pairs for position control), shared across joints.
std::vector<ControllerGains> default_gain_grid(ActuationKind kind, std::size_t dof);

// Mean absolute tracking error of random held targets over `episodes`
// episodes of `horizon` steps: velocity error under velocity control,
// wrapped position error under position control.
double tracking_error(const Environment& prototype, const ActuationMode& mode, int horizon,
                      std::uint64_t seed, int episodes = 4);

// Returns the candidate with the smallest tracking error; ties go to the
// smallest gain magnitude, then to grid order.
TuneResult tune_gains(const Environment& prototype, ActuationKind kind,
                      const ActionBounds& bounds, const std::vector<ControllerGains>& grid,
                      int horizon, std::uint64_t seed, int episodes = 4);

}  // namespace actlab
