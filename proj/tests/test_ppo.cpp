#include <cmath>
#include <filesystem>
#include <random>

#include "actlab/adam.hpp"
#include "actlab/checkpoint.hpp"
#include "actlab/error.hpp"
#include "actlab/loss.hpp"
#include "actlab/ppo.hpp"
#include "actlab/rollout.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace actlab;
using testing_support::tiny_config;

namespace {

std::vector<double> randv(std::mt19937_64& g, std::size_t n) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(g);
  return v;
}

// Batch whose old log-probs equal the current ones (ratio 1).
Batch on_policy_batch(const FlatParams& p, const PolicySpec& spec, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  Batch b;
  b.obs_dim = spec.obs_dim;
  b.act_dim = spec.act_dim;
  b.observations = randv(g, n * spec.obs_dim);
  b.actions = randv(g, n * spec.act_dim);
  for (std::size_t j = 0; j < n; ++j) {
    const std::span<const double> obs(b.observations.data() + j * spec.obs_dim, spec.obs_dim);
    const auto out = forward_policy(p, spec, obs);
    b.old_log_probs.push_back(
        log_prob(out.mean, out.log_std, std::span<const double>(b.actions.data() + j * spec.act_dim, spec.act_dim)));
  }
  b.advantages = randv(g, n);
  b.returns = randv(g, n);
  b.old_values.assign(n, 0.0);
  return b;
}

}  // namespace

TEST_CASE("GAE reductions") {
  std::mt19937_64 g(1);
  const auto r = randv(g, 12), v = randv(g, 12);
  const double last = 0.37;
  const auto td = compute_gae(r, v, last, 0.9, 0.0);
  for (std::size_t t = 0; t < r.size(); ++t) {
    const double next = t + 1 < r.size() ? v[t + 1] : last;
    CHECK(td.advantages[t] == r[t] + 0.9 * next - v[t]);
    CHECK(td.returns[t] == td.advantages[t] + v[t]);
  }
  const std::vector<double> zeros(12, 0.0);
  const auto mc = compute_gae(r, zeros, 0.0, 1.0, 1.0);
  for (std::size_t t = 0; t < r.size(); ++t) {
    double s = 0;
    for (std::size_t k = t; k < r.size(); ++k) s += r[k];
    CHECK(mc.advantages[t] == doctest::Approx(s).epsilon(1e-13));
  }
}

TEST_CASE("GAE matches the double sum on random instances") {
  std::mt19937_64 g(2);
  std::uniform_int_distribution<int> len(5, 20);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t T = static_cast<std::size_t>(len(g));
    const auto r = randv(g, T), v = randv(g, T);
    const double last = randv(g, 1)[0], gamma = 0.5 + 0.49 * u(g), lambda = u(g);
    const auto got = compute_gae(r, v, last, gamma, lambda);
    const auto want = oracle::gae(r, v, last, gamma, lambda);
    for (std::size_t t = 0; t < T; ++t) REQUIRE(std::abs(got.advantages[t] - want[t]) < 1e-12);
  }
}

TEST_CASE("GAE with segment ends equals separate segments") {
  std::mt19937_64 g(3);
  const auto r = randv(g, 10), v = randv(g, 10), nv = randv(g, 10);
  std::vector<double> next(10);
  for (int t = 0; t < 9; ++t) next[t] = v[t + 1];
  next[4] = nv[4];
  next[9] = nv[9];
  std::vector<std::uint8_t> ends(10, 0);
  ends[4] = ends[9] = 1;
  const auto all = compute_gae(r, v, next, ends, 0.99, 0.95);
  const std::vector<double> r1(r.begin(), r.begin() + 5), v1(v.begin(), v.begin() + 5);
  const std::vector<double> r2(r.begin() + 5, r.end()), v2(v.begin() + 5, v.end());
  const auto a = compute_gae(r1, v1, nv[4], 0.99, 0.95);
  const auto b = compute_gae(r2, v2, nv[9], 0.99, 0.95);
  for (int t = 0; t < 5; ++t) {
    CHECK(all.advantages[t] == doctest::Approx(a.advantages[t]).epsilon(1e-14));
    CHECK(all.advantages[t + 5] == doctest::Approx(b.advantages[t]).epsilon(1e-14));
  }
}

TEST_CASE("advantage normalization") {
  std::mt19937_64 g(4);
  auto a = randv(g, 2048);
  for (auto& x : a) x = 3.0 * x + 7.0;
  normalize_advantages(a);
  double m = 0, s = 0;
  for (double x : a) m += x;
  m /= a.size();
  for (double x : a) s += (x - m) * (x - m);
  CHECK(std::abs(m) < 1e-10);
  CHECK(std::abs(std::sqrt(s / a.size()) - 1.0) < 1e-8);
  Vec c(10, 4.0);
  normalize_advantages(c);
  for (double x : c) CHECK(x == 0.0);
}

TEST_CASE("unit ratio and zero advantage") {
  const PolicySpec spec{3, 2, {8, 8}};
  Rng rng(1);
  const FlatParams p = init_params(spec, rng);
  Batch b = on_policy_batch(p, spec, 50, 9);
  double mean_a = 0;
  for (double x : b.advantages) mean_a += x;
  mean_a /= 50;
  CHECK(ppo_loss(b, p, spec, {}).policy == doctest::Approx(-mean_a).epsilon(1e-13));
  normalize_advantages(b.advantages);
  CHECK(std::abs(ppo_loss(b, p, spec, {}).policy) < 1e-15);
  for (auto& x : b.old_log_probs) x -= 0.7;
  b.advantages.assign(50, 0.0);
  CHECK(ppo_loss(b, p, spec, {}).policy == 0.0);
}

TEST_CASE("loss and gradient match brute-force reimplementation") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto in = oracle::random_instance(seed, 24);
    const auto got = ppo_loss_grad(in.batch, in.params, in.spec, in.cfg);
    const auto want = oracle::ppo_loss(in.batch, in.params, in.spec, in.cfg);
    CHECK(std::abs(got.loss.total - static_cast<double>(want.total)) < 1e-10);
    CHECK(std::abs(got.loss.policy - static_cast<double>(want.policy)) < 1e-10);
    CHECK(std::abs(got.loss.value - static_cast<double>(want.value)) < 1e-10);
    const FlatParams g = got.total(in.cfg);
    const double h = 1e-6;
    for (std::size_t k = 0; k < g.size(); ++k) {
      FlatParams a = in.params, b = in.params;
      a.data[k] += h;
      b.data[k] -= h;
      const double fd = static_cast<double>((oracle::ppo_loss(in.batch, a, in.spec, in.cfg).total -
                                             oracle::ppo_loss(in.batch, b, in.spec, in.cfg).total) /
                                            (2 * h));
      REQUIRE(std::abs(g.data[k] - fd) < 1e-6);
    }
  }
}

TEST_CASE("batched kernel agrees with the serial reference and is worker invariant") {
  const PolicySpec spec{3, 1, {16, 16}};
  Rng rng(2);
  FlatParams p = init_params(spec, rng);
  for (auto& x : p.block("log_std")) x = -0.3;
  Batch b = on_policy_batch(p, spec, 1000, 4);
  for (std::size_t j = 0; j < b.size(); ++j) b.old_log_probs[j] += 0.4 * std::sin(j);
  const LossConfig cfg{0.2, 0.5, 0.01};
  const auto ref = reference::ppo_loss_grad(b, p, spec, cfg);
  const auto w1 = ppo_loss_grad(b, p, spec, cfg, 1);
  const auto w4 = ppo_loss_grad(b, p, spec, cfg, 4);
  CHECK(w1.loss == w4.loss);
  CHECK(w1.policy == w4.policy);
  CHECK(w1.value == w4.value);
  CHECK(ref.loss.total == doctest::Approx(w1.loss.total).epsilon(1e-12));
  const FlatParams a = ref.total(cfg), c = w1.total(cfg);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a.data[k] - c.data[k]) < 1e-12);
  CHECK(ppo_loss(b, p, spec, cfg, 3) == w1.loss);
}

TEST_CASE("policy and value gradients touch disjoint blocks") {
  const auto in = oracle::random_instance(17, 20);
  const auto g = ppo_loss_grad(in.batch, in.params, in.spec, in.cfg);
  for (const auto& blk : in.params.layout.blocks) {
    const bool vf = blk.name.rfind("vf.", 0) == 0;
    for (double x : g.policy.block(blk.name))
      if (vf) REQUIRE(x == 0.0);
    for (double x : g.value.block(blk.name))
      if (!vf) REQUIRE(x == 0.0);
  }
  const FlatParams total = g.total(in.cfg);
  for (std::size_t k = 0; k < total.size(); ++k)
    CHECK(total.data[k] == doctest::Approx(g.policy.data[k] + in.cfg.vf_coef * g.value.data[k] -
                                           in.cfg.ent_coef * g.entropy.data[k]));
}

TEST_CASE("per-sample clipping bound") {
  // -min(rho A, clip(rho) A) is at most (1 + eps)|A| whenever the clip can
  // bind: A >= 0, or rho <= 1 + eps. For A < 0 and rho > 1 + eps the min picks
  // the unclipped, unbounded term by construction.
  const PolicySpec spec{2, 1, {4}};
  Rng rng(3);
  const FlatParams p = init_params(spec, rng);
  const double eps = 0.2;
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 500; ++trial) {
    Batch b = on_policy_batch(p, spec, 1, trial);
    const double shift = u(g);
    b.old_log_probs[0] -= shift;  // rho = exp(shift)
    b.advantages[0] = u(g);
    const double rho = std::exp(shift), A = b.advantages[0];
    const double term = ppo_loss(b, p, spec, {eps, 0.5, 0.0}).policy;
    if (A >= 0 || rho <= 1 + eps) {
      REQUIRE(std::abs(term) <= (1 + eps) * std::abs(A) + 1e-12);
    } else {
      REQUIRE(term == doctest::Approx(-rho * A).epsilon(1e-12));
    }
  }
}

TEST_CASE("huge clip equals the vanilla policy gradient at ratio 1") {
  // Vanilla: -mean(A grad log pi), grad log pi from central differences of
  // the long-double log density.
  const PolicySpec spec{3, 2, {5}};
  FlatParams p = FlatParams::zeros(spec.layout());
  std::mt19937_64 g(6);
  for (auto& x : p.data) x = 0.4 * randv(g, 1)[0];
  Batch b = on_policy_batch(p, spec, 12, 7);
  const auto got = ppo_loss_grad(b, p, spec, {1e12, 0.5, 0.0}).policy;
  auto logp = [&](const FlatParams& q, std::size_t j) {
    std::vector<oracle::ld> x(b.observations.begin() + j * 3, b.observations.begin() + j * 3 + 3);
    const auto mu = oracle::mlp(q, "pi", 3, spec.hidden, 2, x);
    const double* ls = oracle::block_ptr(q, "log_std");
    oracle::ld s = 0;
    for (int i = 0; i < 2; ++i) {
      const oracle::ld z = (b.actions[j * 2 + i] - mu[i]) / std::exp(static_cast<oracle::ld>(ls[i]));
      s += -z * z / 2 - ls[i];
    }
    return s;
  };
  const double h = 1e-6;
  for (std::size_t k = 0; k < p.size(); ++k) {
    FlatParams a = p, c = p;
    a.data[k] += h;
    c.data[k] -= h;
    oracle::ld v = 0;
    for (std::size_t j = 0; j < b.size(); ++j) v -= b.advantages[j] * (logp(a, j) - logp(c, j)) / (2 * h);
    v /= b.size();
    CHECK(std::abs(got.data[k] - static_cast<double>(v)) < 1e-7);
  }
  // At ratio 1 the default clip does not bind either.
  CHECK(ppo_loss_grad(b, p, spec, {0.2, 0.5, 0.0}).policy == got);
}

TEST_CASE("Adam") {
  const PolicySpec spec{2, 1, {3}};
  Rng rng(1);
  FlatParams p = init_params(spec, rng);
  const FlatParams p0 = p;
  AdamState st;
  adam_step(p, FlatParams::zeros(p.layout), st, 1e-3, 0.0);
  CHECK(p == p0);

  std::mt19937_64 g(2);
  FlatParams grad = FlatParams::zeros(p.layout);
  for (auto& x : grad.data) x = randv(g, 1)[0];
  FlatParams q = p0;
  AdamState s2;
  oracle::Adam hand;
  std::vector<double> x = p0.data;
  for (int step = 0; step < 3; ++step) {
    adam_step(q, grad, s2, 3e-4, 0.0);
    hand.step(x, grad.data, 3e-4);
    for (std::size_t k = 0; k < x.size(); ++k) REQUIRE(std::abs(q.data[k] - x[k]) < 1e-12);
  }
  // One step from zero: m_hat = g, v_hat = g^2, update = -lr g / (|g| + eps).
  FlatParams r = p0;
  AdamState s3;
  adam_step(r, grad, s3, 1e-3, 0.0);
  for (std::size_t k = 0; k < r.size(); ++k)
    CHECK(std::abs((r.data[k] - p0.data[k]) + 1e-3 * grad.data[k] / (std::abs(grad.data[k]) + 1e-8)) < 1e-12);

  FlatParams a = p0, b = p0;
  AdamState sa, sb;
  for (int i = 0; i < 5; ++i) {
    adam_step(a, grad, sa, 1e-3, 0.5);
    adam_step(b, grad, sb, 1e-3, 0.5);
  }
  CHECK(a == b);
  CHECK(sa == sb);
}

TEST_CASE("gradient norm clipping") {
  const PolicySpec spec{2, 1, {3}};
  FlatParams g = FlatParams::zeros(spec.layout());
  for (std::size_t k = 0; k < g.size(); ++k) g.data[k] = 1.0;
  const double n0 = norm(g);
  CHECK(clip_grad_norm(g, 0.5) == n0);
  CHECK(norm(g) == doctest::Approx(0.5 * n0 / (n0 + 1e-6)));
  FlatParams small = FlatParams::zeros(spec.layout());
  small.data[0] = 0.1;
  const FlatParams keep = small;
  clip_grad_norm(small, 0.5);
  CHECK(small == keep);
}

TEST_CASE("checkpoint schedule") {
  const auto s = checkpoint_schedule(73, 20);
  CHECK(s.size() == 21);
  CHECK(s.back() == 73);
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i] > s[i - 1]);
  CHECK(s.front() == 4);  // ceil(73 / 21)
  const auto small = checkpoint_schedule(5, 20);
  CHECK(small == std::vector<std::int64_t>{1, 2, 3, 4, 5});
  CHECK(checkpoint_schedule(0, 20).empty());
  CHECK(checkpoint_schedule(10, 0) == std::vector<std::int64_t>{10});
}

TEST_CASE("config validation") {
  PpoConfig c;
  CHECK_NOTHROW(c.validate());
  c.minibatch_size = 100;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.clip = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.gamma = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.gae_lambda = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.normalize_observations = true;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.gradient_batch_override = 10000;
  c.total_env_steps = 25000;
  CHECK(c.rollout_length() == 10000);
  CHECK(c.iterations() == 3);
}

TEST_CASE("zero-step run returns the initial checkpoint") {
  const auto res = train(tiny_config(0), 3);
  CHECK(res.curve.empty());
  CHECK(res.final.env_step == 0);
  CHECK(res.final.iteration == 0);
  Trainer t(tiny_config(0), 3);
  CHECK(res.final == t.checkpoint());
}

TEST_CASE("training is deterministic and resumes bit-identically") {
  const RunConfig cfg = tiny_config(640);
  const auto a = train(cfg, 11);
  const auto b = train(cfg, 11);
  CHECK(a.curve == b.curve);
  CHECK(encode_checkpoint(a.final) == encode_checkpoint(b.final));
  REQUIRE(a.series.size() == 4);
  for (std::size_t i = 1; i < a.series.size(); ++i) CHECK(a.series[i].env_step > a.series[i - 1].env_step);
  CHECK(a.series.back() == a.final);
  CHECK(a.final.env_step == 640);
  CHECK(a.curve.size() == 6);  // iteration 0 plus five rollouts

  for (std::size_t k = 0; k + 1 < a.series.size(); ++k) {
    const Checkpoint reloaded = decode_checkpoint(encode_checkpoint(a.series[k]));
    const auto r = resume(reloaded);
    CHECK(r.curve == a.curve);
    CHECK(encode_checkpoint(r.final) == encode_checkpoint(a.final));
  }
  const auto c = train(cfg, 12);
  CHECK(c.curve != a.curve);
}

TEST_CASE("checkpoint stored loss is the loss on the frozen batch") {
  const auto res = train(tiny_config(256), 1);
  for (const auto& ck : res.series) {
    const RunConfig rc = ck.config();
    CHECK(ppo_loss(ck.frozen, ck.params, rc.policy_spec(), rc.ppo.loss()) == ck.stored_loss);
    CHECK(ck.frozen.size() == 128);
  }
}

TEST_CASE("accurate-gradient mode takes one step per fresh batch") {
  RunConfig cfg = tiny_config(1000);
  cfg.ppo.gradient_batch_override = 250;
  const auto res = train(cfg, 2);
  CHECK(res.final.gradient_step == 4);
  CHECK(res.final.env_step == 1000);
  CHECK(res.final.frozen.size() == 250);
  for (std::size_t i = 0; i < res.curve.size(); ++i)
    CHECK(res.curve[i].gradient_step == static_cast<std::int64_t>(i));
}

TEST_CASE("non-finite training aborts with a batch dump") {
  RunConfig cfg = tiny_config(2048);
  cfg.ppo.learning_rate = 1e300;
  cfg.ppo.max_grad_norm = 0.0;
  const auto dir = testing_support::scratch_dir("nan");
  TrainOptions opt;
  opt.dump_dir = dir;
  CHECK_THROWS_AS(train(cfg, 0, opt), NumericError);
  bool found = false;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().filename().string().rfind("nan_dump_seed0_iter", 0) == 0) found = true;
  CHECK(found);
}

TEST_CASE("evaluation protocol is deterministic") {
  const RunConfig cfg = tiny_config();
  Rng rng(0);
  const FlatParams p = init_params(cfg.policy_spec(), rng);
  const auto a = evaluate_policy(p, cfg.policy_spec(), cfg.task_factory(), 5, 3, 0.99);
  const auto b = evaluate_policy(p, cfg.policy_spec(), cfg.task_factory(), 5, 3, 0.99);
  CHECK(a.returns == b.returns);
  CHECK(a.returns.size() == 5);
  CHECK(a.steps == 1000);
  const auto r = evaluate_random(cfg.policy_spec(), cfg.task_factory(), 5, 3, 0.99);
  CHECK(r.returns != a.returns);
}
