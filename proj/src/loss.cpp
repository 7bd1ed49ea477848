#include "actlab/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "actlab/error.hpp"
#include "actlab/parallel.hpp"

namespace actlab {

namespace {

struct ShardResult {
  double policy_sum = 0.0;
  double value_sum = 0.0;
  FlatParams g_policy;
  FlatParams g_value;
};

ShardResult run_shard(const Batch& batch, std::size_t begin, std::size_t end,
                      const FlatParams& params, const PolicySpec& spec, const LossConfig& cfg,
                      bool with_grad) {
  const std::size_t n = end - begin;
  const std::size_t od = spec.obs_dim, ad = spec.act_dim;
  ShardResult r;
  Eigen::Map<const Matrix> x(batch.observations.data() + begin * od, od, n);

  MlpTape pi_tape, vf_tape;
  const Matrix mu = mlp_forward(params, "pi", spec.policy_net(), x, with_grad ? &pi_tape : nullptr);
  const Matrix v = mlp_forward(params, "vf", spec.value_net(), x, with_grad ? &vf_tape : nullptr);
  const auto log_std = params.block("log_std");
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);

  Vec inv_var(ad);
  double log_std_sum = 0.0;
  for (std::size_t i = 0; i < ad; ++i) {
    inv_var[i] = std::exp(-2.0 * log_std[i]);
    log_std_sum += log_std[i];
  }

  Matrix g_mu(ad, n);
  Matrix g_v(1, n);
  Vec g_log_std(ad, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double* a = batch.actions.data() + (begin + j) * ad;
    double quad = 0.0;
    for (std::size_t i = 0; i < ad; ++i) {
      const double d = a[i] - mu(i, j);
      quad += d * d * inv_var[i];
    }
    const double logp = -0.5 * quad - log_std_sum - half_log_2pi * static_cast<double>(ad);
    const double adv = batch.advantages[begin + j];
    const double ratio = std::exp(logp - batch.old_log_probs[begin + j]);
    const double surr1 = ratio * adv;
    const double surr2 = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
    r.policy_sum += -std::min(surr1, surr2);
    const double verr = v(0, j) - batch.returns[begin + j];
    r.value_sum += verr * verr;
    if (!with_grad) continue;
    // d(-min)/d(logp): the unclipped branch carries -ratio * A, the clipped
    // branch is only selected when the ratio lies outside the clip range.
    const double coef = surr1 <= surr2 ? -surr1 : 0.0;
    for (std::size_t i = 0; i < ad; ++i) {
      const double d = a[i] - mu(i, j);
      g_mu(i, j) = coef * d * inv_var[i];
      g_log_std[i] += coef * (d * d * inv_var[i] - 1.0);
    }
    g_v(0, j) = 2.0 * verr;
  }
  if (with_grad) {
    r.g_policy = FlatParams::zeros(params.layout);
    r.g_value = FlatParams::zeros(params.layout);
    mlp_backward(params, "pi", spec.policy_net(), pi_tape, g_mu, r.g_policy);
    auto ls = r.g_policy.block("log_std");
    for (std::size_t i = 0; i < ad; ++i) ls[i] += g_log_std[i];
    mlp_backward(params, "vf", spec.value_net(), vf_tape, g_v, r.g_value);
  }
  return r;
}

void check_inputs(const Batch& batch, const FlatParams& params, const PolicySpec& spec) {
  batch.validate();
  if (batch.obs_dim != spec.obs_dim || batch.act_dim != spec.act_dim)
    throw ConfigError("batch dimensions do not match the policy");
  if (params.layout != spec.layout()) throw ConfigError("parameters do not match the policy layout");
}

std::vector<ShardResult> run_shards(const Batch& batch, const FlatParams& params,
                                    const PolicySpec& spec, const LossConfig& cfg, int workers,
                                    bool with_grad) {
  const std::size_t n = batch.size();
  const std::size_t n_shards = (n + kShardSize - 1) / kShardSize;
  std::vector<ShardResult> shards(n_shards);
  parallel_for(n_shards, workers, [&](std::size_t s) {
    const std::size_t begin = s * kShardSize;
    const std::size_t end = std::min(n, begin + kShardSize);
    shards[s] = run_shard(batch, begin, end, params, spec, cfg, with_grad);
  });
  return shards;
}

LossTerms finish_terms(double policy_sum, double value_sum, std::size_t n,
                       const FlatParams& params, const LossConfig& cfg) {
  LossTerms t;
  if (n > 0) {
    t.policy = policy_sum / static_cast<double>(n);
    t.value = value_sum / static_cast<double>(n);
  }
  t.entropy = gaussian_entropy(params.block("log_std"));
  t.total = t.policy + cfg.vf_coef * t.value - cfg.ent_coef * t.entropy;
  return t;
}

FlatParams entropy_gradient(const FlatParams& params) {
  FlatParams g = FlatParams::zeros(params.layout);
  for (double& x : g.block("log_std")) x = 1.0;
  return g;
}

}  // namespace

Batch Batch::select(std::span<const std::size_t> indices) const {
  Batch out;
  out.obs_dim = obs_dim;
  out.act_dim = act_dim;
  const std::size_t m = indices.size();
  out.observations.reserve(m * obs_dim);
  out.actions.reserve(m * act_dim);
  for (std::size_t idx : indices) {
    if (idx >= size()) throw ConfigError("Batch::select: index out of range");
    out.observations.insert(out.observations.end(), observations.begin() + idx * obs_dim,
                            observations.begin() + (idx + 1) * obs_dim);
    out.actions.insert(out.actions.end(), actions.begin() + idx * act_dim,
                       actions.begin() + (idx + 1) * act_dim);
    out.old_log_probs.push_back(old_log_probs[idx]);
    out.advantages.push_back(advantages[idx]);
    out.returns.push_back(returns[idx]);
    out.old_values.push_back(old_values[idx]);
  }
  return out;
}

void Batch::validate() const {
  const std::size_t n = size();
  if (observations.size() != n * obs_dim || actions.size() != n * act_dim ||
      advantages.size() != n || returns.size() != n || old_values.size() != n)
    throw ConfigError("batch arrays are not aligned");
}

FlatParams LossGradients::total(const LossConfig& cfg) const {
  FlatParams g = policy;
  axpy(cfg.vf_coef, value, g);
  if (cfg.ent_coef != 0.0) axpy(-cfg.ent_coef, entropy, g);
  return g;
}

LossTerms ppo_loss(const Batch& batch, const FlatParams& params, const PolicySpec& spec,
                   const LossConfig& cfg, int workers) {
  check_inputs(batch, params, spec);
  const auto shards = run_shards(batch, params, spec, cfg, workers, false);
  double ps = 0.0, vs = 0.0;
  for (const auto& s : shards) {
    ps += s.policy_sum;
    vs += s.value_sum;
  }
  return finish_terms(ps, vs, batch.size(), params, cfg);
}

LossGradients ppo_loss_grad(const Batch& batch, const FlatParams& params,
                            const PolicySpec& spec, const LossConfig& cfg, int workers) {
  check_inputs(batch, params, spec);
  auto shards = run_shards(batch, params, spec, cfg, workers, true);
  LossGradients out;
  out.policy = FlatParams::zeros(params.layout);
  out.value = FlatParams::zeros(params.layout);
  double ps = 0.0, vs = 0.0;
  for (const auto& s : shards) {
    ps += s.policy_sum;
    vs += s.value_sum;
    axpy(1.0, s.g_policy, out.policy);
    axpy(1.0, s.g_value, out.value);
  }
  const std::size_t n = batch.size();
  if (n > 0) {
    const double inv = 1.0 / static_cast<double>(n);
    for (double& x : out.policy.data) x *= inv;
    for (double& x : out.value.data) x *= inv;
  }
  out.loss = finish_terms(ps, vs, n, params, cfg);
  out.entropy = entropy_gradient(params);
  return out;
}

namespace reference {

namespace {

struct Net {
  std::vector<const double*> w, b;
  std::vector<std::size_t> width;  // width[0] = input dim
  std::vector<std::size_t> w_off, b_off;
};

Net net_of(const FlatParams& p, const char* name, const MlpSpec& m) {
  Net net;
  net.width.push_back(m.input_dim);
  for (std::size_t h : m.hidden) net.width.push_back(h);
  net.width.push_back(m.output_dim);
  for (std::size_t l = 0; l + 1 < net.width.size(); ++l) {
    const std::string prefix = std::string(name) + "." + std::to_string(l);
    const auto& wb = p.layout.at(prefix + ".weight");
    const auto& bb = p.layout.at(prefix + ".bias");
    net.w.push_back(p.data.data() + wb.offset);
    net.b.push_back(p.data.data() + bb.offset);
    net.w_off.push_back(wb.offset);
    net.b_off.push_back(bb.offset);
  }
  return net;
}

// acts[l] holds the output of layer l (acts[0] = input).
void forward(const Net& net, const double* x, std::vector<Vec>& acts) {
  const std::size_t L = net.w.size();
  acts.assign(L + 1, {});
  acts[0].assign(x, x + net.width[0]);
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t in = net.width[l], out = net.width[l + 1];
    acts[l + 1].assign(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      double z = net.b[l][o];
      for (std::size_t i = 0; i < in; ++i) z += net.w[l][o * in + i] * acts[l][i];
      acts[l + 1][o] = l + 1 < L ? std::tanh(z) : z;
    }
  }
}

void backward(const Net& net, const std::vector<Vec>& acts, Vec g, Vec& grad) {
  for (std::size_t l = net.w.size(); l-- > 0;) {
    const std::size_t in = net.width[l], out = net.width[l + 1];
    for (std::size_t o = 0; o < out; ++o) {
      grad[net.b_off[l] + o] += g[o];
      for (std::size_t i = 0; i < in; ++i) grad[net.w_off[l] + o * in + i] += g[o] * acts[l][i];
    }
    if (l == 0) break;
    Vec prev(in, 0.0);
    for (std::size_t i = 0; i < in; ++i) {
      double s = 0.0;
      for (std::size_t o = 0; o < out; ++o) s += net.w[l][o * in + i] * g[o];
      prev[i] = s * (1.0 - acts[l][i] * acts[l][i]);
    }
    g = std::move(prev);
  }
}

}  // namespace

LossGradients ppo_loss_grad(const Batch& batch, const FlatParams& params,
                            const PolicySpec& spec, const LossConfig& cfg) {
  check_inputs(batch, params, spec);
  const Net pi = net_of(params, "pi", spec.policy_net());
  const Net vf = net_of(params, "vf", spec.value_net());
  const auto log_std = params.block("log_std");
  const std::size_t ad = spec.act_dim, od = spec.obs_dim;
  const std::size_t ls_off = params.layout.at("log_std").offset;

  LossGradients out;
  out.policy = FlatParams::zeros(params.layout);
  out.value = FlatParams::zeros(params.layout);
  double ps = 0.0, vs = 0.0;
  std::vector<Vec> acts;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const double* obs = batch.observations.data() + j * od;
    const double* a = batch.actions.data() + j * ad;
    forward(pi, obs, acts);
    const Vec mu = acts.back();
    const double logp = log_prob(mu, log_std, std::span<const double>(a, ad));
    const double ratio = std::exp(logp - batch.old_log_probs[j]);
    const double adv = batch.advantages[j];
    const double surr1 = ratio * adv;
    const double surr2 = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
    ps += -std::min(surr1, surr2);
    const double coef = surr1 <= surr2 ? -surr1 : 0.0;
    Vec g_mu(ad);
    for (std::size_t i = 0; i < ad; ++i) {
      const double var = std::exp(2.0 * log_std[i]);
      const double d = a[i] - mu[i];
      g_mu[i] = coef * d / var;
      out.policy.data[ls_off + i] += coef * (d * d / var - 1.0);
    }
    backward(pi, acts, g_mu, out.policy.data);

    forward(vf, obs, acts);
    const double verr = acts.back()[0] - batch.returns[j];
    vs += verr * verr;
    backward(vf, acts, {2.0 * verr}, out.value.data);
  }
  const std::size_t n = batch.size();
  if (n > 0) {
    for (double& x : out.policy.data) x /= static_cast<double>(n);
    for (double& x : out.value.data) x /= static_cast<double>(n);
  }
  out.loss = finish_terms(ps, vs, n, params, cfg);
  out.entropy = entropy_gradient(params);
  return out;
}

}  // namespace reference

}  // namespace actlab
