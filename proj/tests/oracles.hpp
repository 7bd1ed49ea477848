#pragma once

// Independent reimplementations used as test oracles. Written with plain
// loops (long double where finite differences need headroom) and sharing no
// code with the library beyond the parameter layout.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "actlab/loss.hpp"
#include "actlab/policy.hpp"

namespace oracle {

using ld = long double;

inline const double* block_ptr(const actlab::FlatParams& p, const std::string& name) {
  for (const auto& b : p.layout.blocks)
    if (b.name == name) return p.data.data() + b.offset;
  throw std::runtime_error("oracle: no block " + name);
}

// Chain of y = W x + b with tanh on every hidden layer; W is row-major [out][in].
inline std::vector<ld> mlp(const actlab::FlatParams& p, const std::string& net,
                           std::size_t in_dim, const std::vector<std::size_t>& hidden,
                           std::size_t out_dim, const std::vector<ld>& x) {
  std::vector<ld> h = x;
  std::size_t in = in_dim;
  for (std::size_t l = 0; l <= hidden.size(); ++l) {
    const std::size_t out = l < hidden.size() ? hidden[l] : out_dim;
    const std::string pre = net + "." + std::to_string(l);
    const double* W = block_ptr(p, pre + ".weight");
    const double* b = block_ptr(p, pre + ".bias");
    std::vector<ld> y(out);
    for (std::size_t r = 0; r < out; ++r) {
      ld s = b[r];
      for (std::size_t c = 0; c < in; ++c) s += static_cast<ld>(W[r * in + c]) * h[c];
      y[r] = l < hidden.size() ? std::tanh(s) : s;
    }
    h = std::move(y);
    in = out;
  }
  return h;
}

struct Loss {
  ld total = 0, policy = 0, value = 0, entropy = 0;
};

inline Loss ppo_loss(const actlab::Batch& b, const actlab::FlatParams& p,
                     const actlab::PolicySpec& spec, const actlab::LossConfig& cfg) {
  const ld pi = std::numbers::pi_v<long double>;
  const double* log_std = block_ptr(p, "log_std");
  Loss out;
  const std::size_t n = b.size();
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<ld> x(spec.obs_dim);
    for (std::size_t i = 0; i < spec.obs_dim; ++i) x[i] = b.observations[j * spec.obs_dim + i];
    const auto mu = mlp(p, "pi", spec.obs_dim, spec.hidden, spec.act_dim, x);
    const auto v = mlp(p, "vf", spec.obs_dim, spec.hidden, 1, x);
    ld logp = 0;
    for (std::size_t i = 0; i < spec.act_dim; ++i) {
      const ld sigma = std::exp(static_cast<ld>(log_std[i]));
      const ld z = (b.actions[j * spec.act_dim + i] - mu[i]) / sigma;
      logp += -z * z / 2 - std::log(sigma) - std::log(2 * pi) / 2;
    }
    const ld ratio = std::exp(logp - b.old_log_probs[j]);
    const ld A = b.advantages[j];
    const ld lo = 1 - static_cast<ld>(cfg.clip), hi = 1 + static_cast<ld>(cfg.clip);
    const ld clipped = ratio < lo ? lo : (ratio > hi ? hi : ratio);
    out.policy -= std::min(ratio * A, clipped * A);
    const ld e = v[0] - b.returns[j];
    out.value += e * e;
  }
  out.policy /= static_cast<ld>(n);
  out.value /= static_cast<ld>(n);
  for (std::size_t i = 0; i < spec.act_dim; ++i)
    out.entropy += log_std[i] + std::log(2 * pi * std::numbers::e_v<long double>) / 2;
  out.total = out.policy + static_cast<ld>(cfg.vf_coef) * out.value -
              static_cast<ld>(cfg.ent_coef) * out.entropy;
  return out;
}

// A_t = sum_k (gamma lambda)^k delta_{t+k}, as an explicit double sum.
inline std::vector<double> gae(const std::vector<double>& r, const std::vector<double>& v,
                               double last_value, double gamma, double lambda) {
  const std::size_t T = r.size();
  std::vector<double> delta(T);
  for (std::size_t t = 0; t < T; ++t) {
    const double next = t + 1 < T ? v[t + 1] : last_value;
    delta[t] = r[t] + gamma * next - v[t];
  }
  std::vector<double> A(T);
  for (std::size_t t = 0; t < T; ++t) {
    long double s = 0, w = 1;
    for (std::size_t k = t; k < T; ++k) {
      s += w * delta[k];
      w *= static_cast<long double>(gamma) * lambda;
    }
    A[t] = static_cast<double>(s);
  }
  return A;
}

inline double wrap(double x) {
  const double pi = std::numbers::pi;
  while (x > pi) x -= 2 * pi;
  while (x < -pi) x += 2 * pi;
  return x;
}

// Pendulum, theta = 0 upright, one semi-implicit Euler step.
struct Pendulum {
  double th, thdot;
  double step(double u, double dt = 0.05) {
    u = std::max(-2.0, std::min(2.0, u));
    const double w = wrap(th);
    const double r = -(w * w + 0.1 * thdot * thdot + 0.001 * u * u);
    thdot = thdot + dt * (15.0 * std::sin(th) + 3.0 * u);
    thdot = std::max(-8.0, std::min(8.0, thdot));
    th = wrap(th + dt * thdot);
    return r;
  }
};

// Two damped decoupled joints, I = 0.01, c = 0.1.
struct Arm {
  double q[2], qd[2];
  double dt = 0.02, inertia = 0.01, damping = 0.1, limit = 1.0;
  void step(const double tau[2]) {
    for (int i = 0; i < 2; ++i) {
      const double u = std::max(-limit, std::min(limit, tau[i]));
      qd[i] = qd[i] + dt * (u - damping * qd[i]) / inertia;
      q[i] = wrap(q[i] + dt * qd[i]);
    }
  }
};

struct Adam {
  std::vector<double> m, v;
  int t = 0;
  void step(std::vector<double>& x, const std::vector<double>& g, double lr) {
    if (m.empty()) m.assign(x.size(), 0.0), v.assign(x.size(), 0.0);
    ++t;
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(0.9, t));
      const double vh = v[i] / (1 - std::pow(0.999, t));
      x[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
    }
  }
};

// Random (net, batch) instance with ratios kept away from the clip kinks so
// central differences are well defined.
struct Instance {
  actlab::PolicySpec spec;
  actlab::FlatParams params;
  actlab::Batch batch;
  actlab::LossConfig cfg;
};

inline Instance random_instance(std::uint64_t seed, std::size_t n = 16) {
  std::mt19937_64 g(seed);
  std::uniform_int_distribution<int> dim(1, 4), width(2, 6), depth(1, 2);
  std::normal_distribution<double> nrm(0.0, 1.0);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  Instance in;
  in.spec.obs_dim = static_cast<std::size_t>(dim(g));
  in.spec.act_dim = static_cast<std::size_t>(dim(g));
  in.spec.hidden.clear();
  for (int l = depth(g); l > 0; --l) in.spec.hidden.push_back(static_cast<std::size_t>(width(g)));
  in.params = actlab::FlatParams::zeros(in.spec.layout());
  for (auto& x : in.params.data) x = 0.5 * nrm(g);
  in.cfg = {0.2, 0.5, 0.01};

  auto& b = in.batch;
  b.obs_dim = in.spec.obs_dim;
  b.act_dim = in.spec.act_dim;
  const double* log_std = block_ptr(in.params, "log_std");
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<ld> x(b.obs_dim);
    for (auto& xi : x) {
      xi = nrm(g);
      b.observations.push_back(static_cast<double>(xi));
    }
    const auto mu = mlp(in.params, "pi", b.obs_dim, in.spec.hidden, b.act_dim, x);
    double logp = 0;
    for (std::size_t i = 0; i < b.act_dim; ++i) {
      const double s = std::exp(log_std[i]);
      const double a = static_cast<double>(mu[i]) + s * nrm(g);
      b.actions.push_back(a);
      const double z = (a - static_cast<double>(mu[i])) / s;
      logp += -0.5 * z * z - log_std[i] - 0.5 * std::log(2 * std::numbers::pi);
    }
    double shift;
    do {
      shift = u(g);
    } while (std::abs(std::exp(-shift) - 1.2) < 0.02 || std::abs(std::exp(-shift) - 0.8) < 0.02);
    b.old_log_probs.push_back(logp + shift);
    b.advantages.push_back(nrm(g));
    b.returns.push_back(nrm(g));
    b.old_values.push_back(0.0);
  }
  return in;
}

}  // namespace oracle
