#include "actlab/actuation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "actlab/error.hpp"
#include "actlab/rng.hpp"

namespace actlab {

namespace {

void check_gain(const Vec& g, std::size_t dof, const char* name) {
  if (g.size() != dof)
    throw ConfigError(std::string("actuation: gain ") + name + " needs one entry per joint");
  for (double x : g)
    if (!(x > 0.0) || !std::isfinite(x))
      throw ConfigError(std::string("actuation: gain ") + name + " must be finite and > 0");
}

double gain_magnitude(const ControllerGains& g) {
  double s = 0.0;
  for (const Vec* v : {&g.kd_vc, &g.kp_pc, &g.kd_pc})
    for (double x : *v) s += x * x;
  return s;
}

}  // namespace

std::string_view to_string(ActuationKind kind) {
  switch (kind) {
    case ActuationKind::Torque: return "torque";
    case ActuationKind::Velocity: return "velocity";
    case ActuationKind::Position: return "position";
    case ActuationKind::IdealPosition: return "ideal_position";
  }
  return "torque";
}

ActuationKind parse_actuation_kind(std::string_view name) {
  if (name == "torque" || name == "tc") return ActuationKind::Torque;
  if (name == "velocity" || name == "vc") return ActuationKind::Velocity;
  if (name == "position" || name == "pc") return ActuationKind::Position;
  if (name == "ideal_position" || name == "ideal") return ActuationKind::IdealPosition;
  throw ConfigError("unknown actuation mode '" + std::string(name) + "'");
}

void ActuationMode::validate(const EnvSpec& spec) const {
  if (bounds.low.size() != spec.dof || bounds.high.size() != spec.dof)
    throw ConfigError("actuation: bounds need one entry per joint");
  for (std::size_t i = 0; i < spec.dof; ++i)
    if (!(bounds.low[i] < bounds.high[i]) || !std::isfinite(bounds.low[i]) ||
        !std::isfinite(bounds.high[i]))
      throw ConfigError("actuation: bounds require finite low < high");
  switch (kind) {
    case ActuationKind::Velocity:
      check_gain(gains.kd_vc, spec.dof, "kd_vc");
      break;
    case ActuationKind::Position:
      check_gain(gains.kp_pc, spec.dof, "kp_pc");
      check_gain(gains.kd_pc, spec.dof, "kd_pc");
      break;
    default:
      break;
  }
}

Vec affine_rescale(std::span<const double> a, const ActionBounds& bounds) {
  if (a.size() != bounds.low.size()) throw ConfigError("action has wrong dimension");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i])) throw NumericError("action is not finite");
    const double c = std::clamp(a[i], -1.0, 1.0);
    out[i] = bounds.low[i] + 0.5 * (c + 1.0) * (bounds.high[i] - bounds.low[i]);
  }
  return out;
}

Vec apply_torque(std::span<const double> a, const ActionBounds& bounds) {
  return affine_rescale(a, bounds);
}

Vec apply_velocity_control(std::span<const double> a, const JointState& state,
                           const ControllerGains& gains, const ActionBounds& bounds,
                           std::span<const double> torque_limit) {
  const Vec v = affine_rescale(a, bounds);
  Vec tau(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    tau[i] = std::clamp(gains.kd_vc[i] * (v[i] - state.qdot[i]), -torque_limit[i], torque_limit[i]);
  return tau;
}

Vec apply_position_control(std::span<const double> a, const JointState& state,
                           const ControllerGains& gains, const ActionBounds& bounds,
                           std::span<const double> torque_limit, bool wrap_error) {
  const Vec p = affine_rescale(a, bounds);
  Vec tau(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    double err = p[i] - state.q[i];
    if (wrap_error) err = wrap_angle(err);
    tau[i] = std::clamp(gains.kp_pc[i] * err - gains.kd_pc[i] * state.qdot[i],
                        -torque_limit[i], torque_limit[i]);
  }
  return tau;
}

JointState apply_ideal_position(std::span<const double> a, const ActionBounds& bounds) {
  JointState s;
  s.q = affine_rescale(a, bounds);
  s.qdot.assign(s.q.size(), 0.0);
  return s;
}

ActionBounds default_action_bounds(ActuationKind kind, const EnvSpec& spec) {
  ActionBounds b;
  b.low.resize(spec.dof);
  b.high.resize(spec.dof);
  for (std::size_t i = 0; i < spec.dof; ++i) {
    double lo = -std::numbers::pi, hi = std::numbers::pi;
    if (spec.joint_limits) {
      lo = (*spec.joint_limits)[i][0];
      hi = (*spec.joint_limits)[i][1];
    }
    switch (kind) {
      case ActuationKind::Torque:
        b.low[i] = -spec.torque_limit[i];
        b.high[i] = spec.torque_limit[i];
        break;
      case ActuationKind::Velocity: {
        const double vmax = 2.0 * (hi - lo) / (spec.horizon * spec.dt);
        b.low[i] = -vmax;
        b.high[i] = vmax;
        break;
      }
      case ActuationKind::Position:
      case ActuationKind::IdealPosition:
        b.low[i] = lo;
        b.high[i] = hi;
        break;
    }
  }
  return b;
}

ActuatedEnv::ActuatedEnv(std::unique_ptr<Environment> env, ActuationMode mode)
    : env_(std::move(env)), mode_(std::move(mode)) {
  mode_.validate(env_->spec());
  if (mode_.kind == ActuationKind::IdealPosition && !env_->supports_state_override())
    throw ConfigError("ideal position control is not supported by environment '" +
                      std::string(env_->id()) + "'");
}

ActuatedEnv::StepOut ActuatedEnv::step(std::span<const double> action) {
  const EnvSpec& spec = env_->spec();
  Vec tau;
  switch (mode_.kind) {
    case ActuationKind::Torque:
      tau = apply_torque(action, mode_.bounds);
      break;
    case ActuationKind::Velocity:
      tau = apply_velocity_control(action, env_->joint_state(), mode_.gains, mode_.bounds,
                                   spec.torque_limit);
      break;
    case ActuationKind::Position:
      tau = apply_position_control(action, env_->joint_state(), mode_.gains, mode_.bounds,
                                   spec.torque_limit, !spec.joint_limits.has_value());
      break;
    case ActuationKind::IdealPosition: {
      auto t = env_->step_to(apply_ideal_position(action, mode_.bounds));
      return {std::move(t.observation), t.reward, Vec(spec.dof, 0.0)};
    }
  }
  // Torque limits are enforced by the environment as well.
  for (std::size_t i = 0; i < tau.size(); ++i)
    tau[i] = std::clamp(tau[i], -spec.torque_limit[i], spec.torque_limit[i]);
  auto t = env_->step(tau);
  return {std::move(t.observation), t.reward, std::move(tau)};
}

std::vector<ControllerGains> default_gain_grid(ActuationKind kind, std::size_t dof) {
  std::vector<double> values;
  for (int k = 0; k < 7; ++k) values.push_back(std::pow(10.0, -2.0 + 4.0 * k / 6.0));
  std::vector<ControllerGains> grid;
  if (kind == ActuationKind::Velocity) {
    for (double kd : values) grid.push_back({Vec(dof, kd), {}, {}});
  } else if (kind == ActuationKind::Position) {
    for (double kp : values)
      for (double kd : values) grid.push_back({{}, Vec(dof, kp), Vec(dof, kd)});
  } else {
    throw ConfigError("gain tuning applies to velocity and position control only");
  }
  return grid;
}

double tracking_error(const Environment& prototype, const ActuationMode& mode, int horizon,
                      std::uint64_t seed, int episodes) {
  if (mode.kind != ActuationKind::Velocity && mode.kind != ActuationKind::Position)
    throw ConfigError("tracking error is defined for velocity and position control");
  if (horizon < 1 || episodes < 1) throw ConfigError("tracking error needs horizon, episodes >= 1");
  ActuatedEnv task(prototype.clone(), mode);
  const std::size_t dof = task.action_dim();
  const int hold = std::max(1, horizon / 4);
  const bool wrap = !prototype.spec().joint_limits.has_value();

  double total = 0.0;
  long count = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    task.reset(derive_seed(seed, {static_cast<std::uint64_t>(ep), 0}));
    Rng targets(derive_seed(seed, {static_cast<std::uint64_t>(ep), 1}));
    Vec a(dof);
    for (int t = 0; t < horizon; ++t) {
      if (t % hold == 0)
        for (auto& x : a) x = targets.uniform(-1.0, 1.0);
      task.step(a);
      const Vec target = affine_rescale(a, mode.bounds);
      const JointState& s = task.env().joint_state();
      double err = 0.0;
      for (std::size_t i = 0; i < dof; ++i) {
        if (mode.kind == ActuationKind::Velocity) {
          err += std::abs(target[i] - s.qdot[i]);
        } else {
          const double d = target[i] - s.q[i];
          err += std::abs(wrap ? wrap_angle(d) : d);
        }
      }
      total += err / static_cast<double>(dof);
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

TuneResult tune_gains(const Environment& prototype, ActuationKind kind,
                      const ActionBounds& bounds, const std::vector<ControllerGains>& grid,
                      int horizon, std::uint64_t seed, int episodes) {
  if (grid.empty()) throw ConfigError("tune_gains: candidate grid is empty");
  TuneResult result;
  std::size_t best = 0;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    ActuationMode mode{kind, grid[c], bounds};
    double err = tracking_error(prototype, mode, horizon, seed, episodes);
    if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();
    result.table.push_back({grid[c], err});
    if (c == 0) continue;
    const double best_err = result.table[best].error;
    if (err < best_err ||
        (err == best_err && gain_magnitude(grid[c]) < gain_magnitude(grid[best])))
      best = c;
  }
  result.best = grid[best];
  result.best_error = result.table[best].error;
  return result;
}

}  // namespace actlab
