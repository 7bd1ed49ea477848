#include <cmath>
#include <numbers>

#include "actlab/actuation.hpp"
#include "actlab/error.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace actlab;
constexpr double kPi = std::numbers::pi;

namespace {

ActionBounds sym(double x, std::size_t dof = 1) { return {Vec(dof, -x), Vec(dof, x)}; }

const Vec kLimit1{100.0};

}  // namespace

TEST_CASE("affine rescale midpoint, endpoint, linearity and clipping") {
  const auto b = sym(2.0);
  CHECK(apply_torque(Vec{0.0}, b)[0] == 0.0);
  CHECK(apply_torque(Vec{1.0}, b)[0] == 2.0);
  CHECK(apply_torque(Vec{0.5}, b)[0] == 1.0);
  CHECK(apply_torque(Vec{-1.0}, b)[0] == -2.0);
  CHECK(apply_torque(Vec{7.0}, b)[0] == 2.0);
  CHECK_THROWS_AS(apply_torque(Vec{0.0, 0.0}, b), ConfigError);
  CHECK_THROWS_AS(apply_torque(Vec{std::nan("")}, b), NumericError);
}

TEST_CASE("velocity control law") {
  const ControllerGains g{{1.0}, {}, {}};
  const auto b = sym(2.0);
  CHECK(apply_velocity_control(Vec{0.5}, {{0.0}, {0.0}}, g, b, kLimit1)[0] == 1.0);
  CHECK(apply_velocity_control(Vec{0.5}, {{0.3}, {1.0}}, g, b, kLimit1)[0] == 0.0);
  // Saturation after the control law.
  const ControllerGains big{{50.0}, {}, {}};
  CHECK(apply_velocity_control(Vec{1.0}, {{0.0}, {0.0}}, big, b, Vec{2.0})[0] == 2.0);
}

TEST_CASE("position control law") {
  const ControllerGains g{{}, {2.0}, {0.0}};
  const auto b = sym(kPi);
  const double a = 0.5 / kPi;  // p = 0.5
  CHECK(apply_position_control(Vec{a}, {{0.0}, {0.0}}, g, b, kLimit1)[0] ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(apply_position_control(Vec{a}, {{0.5}, {0.0}}, g, b, kLimit1)[0]) < 1e-14);
  // Exact fixed point: p taken from the rescale itself.
  const double p = affine_rescale(Vec{a}, b)[0];
  CHECK(apply_position_control(Vec{a}, {{p}, {0.0}}, g, b, kLimit1)[0] == 0.0);
  // Damping term opposes velocity.
  const ControllerGains gd{{}, {2.0}, {3.0}};
  CHECK(apply_position_control(Vec{a}, {{p}, {1.0}}, gd, b, kLimit1)[0] == -3.0);
  // Error wraps across +-pi for revolute joints.
  const double near_pi = 0.99;
  const double tau = apply_position_control(Vec{near_pi}, {{-kPi + 0.01}, {0.0}}, g, b, kLimit1)[0];
  CHECK(std::abs(tau) < 2.0 * 0.1);
}

TEST_CASE("controllers are pure functions of their inputs") {
  const ControllerGains g{{0.7}, {1.3}, {0.2}};
  const JointState s{{0.4}, {-0.2}};
  const auto b = sym(1.5);
  CHECK(apply_velocity_control(Vec{0.3}, s, g, b, kLimit1) ==
        apply_velocity_control(Vec{0.3}, s, g, b, kLimit1));
  CHECK(apply_position_control(Vec{0.3}, s, g, b, kLimit1) ==
        apply_position_control(Vec{0.3}, s, g, b, kLimit1));
}

TEST_CASE("default bounds") {
  const EnvSpec p = default_env_spec("pendulum");
  CHECK(default_action_bounds(ActuationKind::Torque, p).high[0] == 2.0);
  CHECK(default_action_bounds(ActuationKind::Position, p).low[0] == -kPi);
  CHECK(default_action_bounds(ActuationKind::Velocity, p).high[0] ==
        doctest::Approx(2.0 * 2.0 * kPi / (200 * 0.05)));
}

TEST_CASE("actuated env applies one controller evaluation per step") {
  const EnvConfig cfg = default_env_config("pendulum");
  ActuationMode mode{ActuationKind::Position, {{}, {3.0}, {0.5}},
                     default_action_bounds(ActuationKind::Position, cfg.spec)};
  ActuatedEnv task(make_environment(cfg), mode);
  auto plain = make_environment(cfg);
  task.reset(4);
  plain->reset(4);
  for (int t = 0; t < 50; ++t) {
    const Vec a{0.3 * std::cos(0.1 * t)};
    const Vec tau = apply_position_control(a, plain->joint_state(), mode.gains, mode.bounds,
                                           cfg.spec.torque_limit);
    const double r_plain = plain->step(tau).reward;
    const auto out = task.step(a);
    REQUIRE(out.reward == r_plain);
    REQUIRE(out.torque == tau);
    REQUIRE(task.env().joint_state() == plain->joint_state());
  }
}

TEST_CASE("velocity tracking converges in the predicted number of steps") {
  // One damped joint: qd' = qd (1 - dt (kd + c) / I) + dt kd v / I, a linear
  // recurrence with fixed point kd v / (kd + c).
  EnvConfig cfg = default_env_config("joint_reacher");
  const double kd = 0.05, v = 1.0, dt = 0.02, I = 0.01, c = 0.1;
  ActuationMode mode{ActuationKind::Velocity, {{kd, kd}, {}, {}}, sym(2.0, 2)};
  ActuatedEnv task(make_environment(cfg), mode);
  task.env().restore({{{0, 0}, {0, 0}}, {1.0, 1.0}});
  const double r = 1.0 - dt * (kd + c) / I;
  const double target = kd * v / (kd + c);
  const int n = static_cast<int>(std::ceil(std::log(0.01) / std::log(r)));
  for (int t = 1; t <= n; ++t) {
    task.step(Vec{0.5, 0.5});
    const double err = std::abs(task.env().joint_state().qdot[0] - target) / target;
    if (t == n - 1) CHECK(err > 0.01);
  }
  CHECK(std::abs(task.env().joint_state().qdot[0] - target) / target <= 0.01);
}

TEST_CASE("critically damped position step has no overshoot") {
  // Discrete closed loop on (q - p, qd) has trace 1 + a - dt b and det a with
  // a = 1 - dt (kd + c) / I, b = dt kp / I; a double eigenvalue needs
  // dt b = (1 - sqrt(a))^2.
  const double dt = 0.02, I = 0.01, c = 0.1, kd = 0.05;
  const double a = 1.0 - dt * (kd + c) / I;
  const double kp = std::pow(1.0 - std::sqrt(a), 2) * I / (dt * dt);
  EnvConfig cfg = default_env_config("joint_reacher");
  ActuationMode mode{ActuationKind::Position, {{}, {kp, kp}, {kd, kd}}, sym(kPi, 2)};
  ActuatedEnv task(make_environment(cfg), mode);
  task.env().restore({{{0, 0}, {0, 0}}, {0.0, 0.0}});
  const double step = 0.5;
  oracle::Arm arm{{0, 0}, {0, 0}};
  double peak = 0.0;
  for (int t = 0; t < 400; ++t) {
    task.step(Vec{step / kPi, step / kPi});
    const double tau[2] = {kp * (step - arm.q[0]) - kd * arm.qd[0],
                           kp * (step - arm.q[1]) - kd * arm.qd[1]};
    arm.step(tau);
    REQUIRE(task.env().joint_state().q[0] == doctest::Approx(arm.q[0]).epsilon(1e-12));
    peak = std::max(peak, arm.q[0]);
  }
  CHECK(peak <= step * 1.01);
  CHECK(arm.q[0] == doctest::Approx(step).epsilon(1e-3));
}

TEST_CASE("ideal position control") {
  EnvConfig cfg = default_env_config("joint_reacher");
  ActuationMode mode{ActuationKind::IdealPosition, {}, default_action_bounds(ActuationKind::IdealPosition, cfg.spec)};
  ActuatedEnv task(make_environment(cfg), mode);
  task.reset(12);
  const Vec target = task.env().snapshot().aux;
  const Vec a{target[0] / kPi, target[1] / kPi};
  auto first = task.step(a);
  CHECK(std::abs(first.observation[6]) < 1e-12);
  CHECK(std::abs(first.observation[7]) < 1e-12);
  const Vec q1 = task.env().joint_state().q;
  auto second = task.step(a);
  CHECK(task.env().joint_state().q == q1);
  CHECK(second.reward == 0.0);
  CHECK(second.torque == Vec{0.0, 0.0});

  EnvConfig pend = default_env_config("pendulum");
  ActuationMode ideal{ActuationKind::IdealPosition, {}, sym(kPi)};
  CHECK_THROWS_AS(ActuatedEnv(make_environment(pend), ideal), ConfigError);
}

TEST_CASE("missing or invalid gains are configuration errors") {
  EnvConfig cfg = default_env_config("pendulum");
  CHECK_THROWS_AS(ActuatedEnv(make_environment(cfg), {ActuationKind::Velocity, {}, sym(1.0)}),
                  ConfigError);
  CHECK_THROWS_AS(
      ActuatedEnv(make_environment(cfg), {ActuationKind::Position, {{}, {1.0}, {-1.0}}, sym(1.0)}),
      ConfigError);
  CHECK_THROWS_AS(ActuatedEnv(make_environment(cfg), {ActuationKind::Torque, {}, {{1.0}, {0.0}}}),
                  ConfigError);
}

TEST_CASE("tune_gains selection") {
  auto proto = make_environment(default_env_config("pendulum"));
  const EnvSpec& spec = proto->spec();
  const auto vb = default_action_bounds(ActuationKind::Velocity, spec);

  CHECK_THROWS_AS(tune_gains(*proto, ActuationKind::Velocity, vb, {}, 50, 0), ConfigError);

  const std::vector<ControllerGains> one{{{0.3}, {}, {}}};
  CHECK(tune_gains(*proto, ActuationKind::Velocity, vb, one, 50, 0).best == one[0]);

  // Exhaustive evaluation oracle: score each candidate separately.
  const std::vector<ControllerGains> two{{{0.01}, {}, {}}, {{1.0}, {}, {}}};
  const double e_small = tracking_error(*proto, {ActuationKind::Velocity, two[0], vb}, 200, 3);
  const double e_big = tracking_error(*proto, {ActuationKind::Velocity, two[1], vb}, 200, 3);
  REQUIRE(e_big < e_small);
  const auto res = tune_gains(*proto, ActuationKind::Velocity, vb, two, 200, 3);
  CHECK(res.best == two[1]);
  CHECK(res.best_error == e_big);
  CHECK(res.table.size() == 2);
  CHECK(res.table[0].error == e_small);

  const auto grid = default_gain_grid(ActuationKind::Position, 1);
  CHECK(grid.size() == 49);
  const auto pb = default_action_bounds(ActuationKind::Position, spec);
  const auto r1 = tune_gains(*proto, ActuationKind::Position, pb, grid, 100, 5);
  const auto r2 = tune_gains(*proto, ActuationKind::Position, pb, grid, 100, 5);
  CHECK(r1.best == r2.best);
  CHECK(r1.best_error == r2.best_error);
  for (const auto& row : r1.table) CHECK(r1.best_error <= row.error);
}
