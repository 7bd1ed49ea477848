#include <cmath>
#include <numbers>
#include <random>

#include "actlab/envs.hpp"
#include "actlab/error.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace actlab;
constexpr double kPi = std::numbers::pi;

TEST_CASE("wrap_angle range and idempotence") {
  std::mt19937_64 g(1);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int i = 0; i < 1000; ++i) {
    const double w = wrap_angle(u(g));
    CHECK(w >= -kPi);
    CHECK(w <= kPi);
    CHECK(wrap_angle(w) == w);
  }
  CHECK(std::abs(wrap_angle(3 * kPi)) == doctest::Approx(kPi).epsilon(1e-12));
  CHECK(wrap_angle(2 * kPi + 0.5) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("pendulum hanging equilibrium") {
  const EnvSpec spec = default_env_spec("pendulum");
  auto r = pendulum_step({{kPi}, {0.0}}, 0.0, spec);
  CHECK(r.reward == doctest::Approx(-kPi * kPi).epsilon(1e-14));
  CHECK(std::abs(std::abs(r.state.q[0]) - kPi) < 1e-12);
  CHECK(std::abs(r.state.qdot[0]) < 1e-12);
}

TEST_CASE("pendulum upright fixed point") {
  const EnvSpec spec = default_env_spec("pendulum");
  auto r = pendulum_step({{0.0}, {0.0}}, 0.0, spec);
  CHECK(r.state.q[0] == 0.0);
  CHECK(r.state.qdot[0] == 0.0);
  CHECK(r.reward == 0.0);
}

TEST_CASE("pendulum one hand-computed step") {
  const EnvSpec spec = default_env_spec("pendulum");
  auto r = pendulum_step({{0.1}, {0.0}}, 0.0, spec);
  const double thdot = 0.05 * 15.0 * std::sin(0.1);
  CHECK(thdot == doctest::Approx(0.074875).epsilon(1e-4));
  CHECK(r.state.qdot[0] == doctest::Approx(thdot).epsilon(1e-15));
  CHECK(r.state.q[0] == doctest::Approx(0.1 + 0.05 * thdot).epsilon(1e-15));
}

TEST_CASE("pendulum trajectory matches scalar integrator") {
  const EnvConfig cfg = default_env_config("pendulum");
  auto env = make_environment(cfg);
  env->reset(7);
  oracle::Pendulum o{env->joint_state().q[0], env->joint_state().qdot[0]};
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int t = 0; t < 200; ++t) {
    const double tau = u(g);
    const double r_env = env->step(std::vector<double>{tau}).reward;
    const double r_or = o.step(tau);
    REQUIRE(r_env == r_or);
    REQUIRE(env->joint_state().q[0] == o.th);
    REQUIRE(env->joint_state().qdot[0] == o.thdot);
  }
}

TEST_CASE("pendulum energy drift at small dt") {
  EnvSpec spec = default_env_spec("pendulum");
  spec.dt = 1e-4;
  JointState s{{kPi - 0.5}, {0.0}};
  auto energy = [](const JointState& x) { return 0.5 * x.qdot[0] * x.qdot[0] + 15.0 * std::cos(x.q[0]); };
  const double e0 = energy(s);
  const int period_steps = static_cast<int>(2 * kPi / std::sqrt(15.0) / spec.dt) + 1;
  double worst = 0.0;
  for (int t = 0; t < period_steps; ++t) {
    s = pendulum_step(s, 0.0, spec).state;
    worst = std::max(worst, std::abs(energy(s) - e0) / std::abs(e0));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("non-finite state is rejected") {
  const EnvSpec spec = default_env_spec("pendulum");
  CHECK_THROWS_AS(pendulum_step({{std::nan("")}, {0.0}}, 0.0, spec), NumericError);
  CHECK_THROWS_AS(pendulum_step({{0.0}, {INFINITY}}, 0.0, spec), NumericError);
  CHECK_THROWS_AS(pendulum_step({{0.0}, {0.0}}, std::nan(""), spec), NumericError);
}

TEST_CASE("reacher kinematics and on-target reward") {
  const EnvSpec spec = default_env_spec("reacher");
  const ReacherParams p;
  const double q0[2] = {0.0, 0.0};
  const auto tip = fingertip(q0, p);
  CHECK(tip[0] == doctest::Approx(0.2));
  CHECK(tip[1] == 0.0);
  auto r = reacher_step({{0, 0}, {0, 0}}, std::vector<double>{0, 0}, spec, p, tip);
  CHECK(r.reward == 0.0);
  const double q1[2] = {kPi / 2, 0.0};
  const auto tip1 = fingertip(q1, p);
  CHECK(std::abs(tip1[0]) < 1e-15);
  CHECK(tip1[1] == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("reacher trajectory matches duplicate integrator bit for bit") {
  const EnvSpec spec = default_env_spec("reacher");
  const ReacherParams p;
  std::mt19937_64 g(11);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int trial = 0; trial < 20; ++trial) {
    JointState s{{u(g), u(g)}, {u(g), u(g)}};
    oracle::Arm arm{{s.q[0], s.q[1]}, {s.qdot[0], s.qdot[1]}};
    for (int t = 0; t < 10; ++t) {
      const double tau[2] = {u(g), u(g)};
      s = reacher_step(s, std::vector<double>{tau[0], tau[1]}, spec, p, {0.1, 0.1}).state;
      arm.step(tau);
      for (int i = 0; i < 2; ++i) {
        REQUIRE(s.q[i] == arm.q[i]);
        REQUIRE(s.qdot[i] == arm.qd[i]);
      }
    }
  }
}

TEST_CASE("joint-space reacher reward scaling") {
  const EnvSpec spec = default_env_spec("joint_reacher");
  const ReacherParams p;
  const std::vector<double> q{0.3, -0.4};
  CHECK(joint_space_reward(q, q) == 0.0);
  CHECK(joint_space_reward(std::vector<double>{0, 0}, std::vector<double>{kPi / 2, 0}) ==
        doctest::Approx(-1.0).epsilon(1e-15));
  CHECK_THROWS_AS(joint_space_reacher_step({{0, 0}, {0, 0}}, std::vector<double>{0, 0}, spec, p,
                                           std::vector<double>{0.0}),
                  ConfigError);
  auto r = joint_space_reacher_step({{0, 0}, {0, 0}}, std::vector<double>{0, 0}, spec, p,
                                    std::vector<double>{kPi / 2, 0});
  CHECK(r.reward == doctest::Approx(-1.0));
  CHECK(r.observation.size() == 8);
  CHECK(r.observation[6] == doctest::Approx(kPi / 2));
}

TEST_CASE("rewards stay inside the declared bounds") {
  for (const char* id : {"pendulum", "reacher", "joint_reacher"}) {
    auto env = make_environment(default_env_config(id));
    const auto bounds = env->reward_bounds();
    std::mt19937_64 g(5);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int ep = 0; ep < 5; ++ep) {
      env->reset(static_cast<std::uint64_t>(ep));
      for (int t = 0; t < 200; ++t) {
        std::vector<double> tau(env->spec().dof);
        for (auto& x : tau) x = u(g);
        const double r = env->step(tau).reward;
        REQUIRE(r >= bounds.low);
        REQUIRE(r <= bounds.high);
      }
    }
  }
}

TEST_CASE("reset determinism and replay") {
  for (const char* id : {"pendulum", "reacher", "joint_reacher"}) {
    auto a = make_environment(default_env_config(id));
    auto b = make_environment(default_env_config(id));
    CHECK(a->reset(42) == b->reset(42));
    CHECK(a->reset(1) != a->reset(2));
    std::vector<double> ra, rb;
    for (auto* env : {a.get(), b.get()}) {
      auto& out = env == a.get() ? ra : rb;
      env->reset(9);
      for (int t = 0; t < 200; ++t)
        out.push_back(env->step(std::vector<double>(env->spec().dof, 0.3 * std::sin(t))).reward);
    }
    CHECK(ra == rb);
  }
}

TEST_CASE("pendulum reset distribution over seeds 0..99") {
  auto env = make_environment(default_env_config("pendulum"));
  double sum_th = 0, sum_thd = 0;
  const int n = 100;
  for (int s = 0; s < n; ++s) {
    env->reset(static_cast<std::uint64_t>(s));
    sum_th += env->joint_state().q[0];
    sum_thd += env->joint_state().qdot[0];
  }
  // theta ~ U(-pi, pi), theta_dot ~ U(-1, 1): both mean 0.
  const double se_th = (2 * kPi / std::sqrt(12.0)) / std::sqrt(n);
  const double se_thd = (2.0 / std::sqrt(12.0)) / std::sqrt(n);
  CHECK(std::abs(sum_th / n) < 3 * se_th);
  CHECK(std::abs(sum_thd / n) < 3 * se_thd);
}

TEST_CASE("joint reacher reset distribution over seeds 0..99") {
  auto env = make_environment(default_env_config("joint_reacher"));
  double sum_target = 0;
  const int n = 100;
  for (int s = 0; s < n; ++s) {
    auto snap = (env->reset(static_cast<std::uint64_t>(s)), env->snapshot());
    REQUIRE(std::abs(snap.state.q[0]) <= 0.1);
    sum_target += snap.aux[0];
  }
  CHECK(std::abs(sum_target / n) < 3 * (2 * kPi / std::sqrt(12.0)) / std::sqrt(n));
}

TEST_CASE("snapshot restore resumes identically") {
  auto env = make_environment(default_env_config("reacher"));
  env->reset(3);
  for (int t = 0; t < 17; ++t) env->step(std::vector<double>{0.2, -0.1});
  const auto snap = env->snapshot();
  auto copy = env->clone();
  const double r1 = env->step(std::vector<double>{0.5, 0.5}).reward;
  auto other = make_environment(default_env_config("reacher"));
  other->restore(snap);
  CHECK(other->step(std::vector<double>{0.5, 0.5}).reward == r1);
  CHECK(copy->step(std::vector<double>{0.5, 0.5}).reward == r1);
}

TEST_CASE("pendulum has no state override") {
  auto env = make_environment(default_env_config("pendulum"));
  CHECK_FALSE(env->supports_state_override());
  CHECK_THROWS_AS(env->step_to({{0.0}, {0.0}}), ConfigError);
}

TEST_CASE("unknown environment and bad spec") {
  EnvConfig c = default_env_config("pendulum");
  c.id = "cartpole";
  CHECK_THROWS_AS(make_environment(c), ConfigError);
  c = default_env_config("pendulum");
  c.spec.dt = -1.0;
  CHECK_THROWS_AS(make_environment(c), ConfigError);
}
