#include "actlab/gradsim.hpp"

#include <algorithm>
#include <cmath>

#include "actlab/error.hpp"
#include "actlab/parallel.hpp"
#include "actlab/rollout.hpp"

namespace actlab {

std::string_view to_string(LossTerm t) {
  switch (t) {
    case LossTerm::Total: return "total";
    case LossTerm::Policy: return "policy";
    case LossTerm::Value: return "value";
  }
  return "total";
}

LossTerm parse_loss_term(std::string_view name) {
  if (name == "total") return LossTerm::Total;
  if (name == "policy") return LossTerm::Policy;
  if (name == "value") return LossTerm::Value;
  throw ConfigError("unknown loss term '" + std::string(name) + "' (expected total, policy or value)");
}

void GradSimConfig::validate() const {
  if (oracle_samples < 1) throw ConfigError("gradsim: oracle_samples must be >= 1");
  if (batch_sizes.empty()) throw ConfigError("gradsim: batch_sizes must not be empty");
  for (auto b : batch_sizes) {
    if (b < 1) throw ConfigError("gradsim: batch sizes must be >= 1");
    if (b > oracle_samples) throw ConfigError("gradsim: oracle_samples must exceed every batch size");
  }
  if (n_estimates < 2) throw ConfigError("gradsim: n_estimates must be >= 2");
  if (terms.empty()) throw ConfigError("gradsim: loss_terms must not be empty");
  if (workers < 1) throw ConfigError("gradsim: workers must be >= 1");
}

nlohmann::json to_json(const GradSimConfig& c) {
  nlohmann::json terms = nlohmann::json::array();
  for (auto t : c.terms) terms.push_back(std::string(to_string(t)));
  return {{"oracle_samples", c.oracle_samples},
          {"batch_sizes", c.batch_sizes},
          {"n_estimates", c.n_estimates},
          {"loss_terms", terms},
          {"pairing", c.pairing == Pairing::Oracle ? "oracle" : "all_pairs"},
          {"seed", c.seed}};
}

GradSimConfig gradsim_config_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j, {"oracle_samples", "batch_sizes", "n_estimates", "loss_terms", "pairing", "seed"},
                      "gradsim");
  GradSimConfig c;
  try {
    c.oracle_samples = j.value("oracle_samples", c.oracle_samples);
    c.batch_sizes = j.value("batch_sizes", c.batch_sizes);
    c.n_estimates = j.value("n_estimates", c.n_estimates);
    c.seed = j.value("seed", c.seed);
    if (j.contains("loss_terms")) {
      c.terms.clear();
      for (const auto& t : j["loss_terms"]) c.terms.push_back(parse_loss_term(t.get<std::string>()));
    }
    if (j.contains("pairing")) {
      const auto p = j["pairing"].get<std::string>();
      if (p == "oracle") c.pairing = Pairing::Oracle;
      else if (p == "all_pairs") c.pairing = Pairing::AllPairs;
      else throw ConfigError("gradsim: pairing must be oracle or all_pairs");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("gradsim: ") + e.what());
  }
  c.validate();
  return c;
}

Cosine cosine_similarity(const FlatParams& g1, const FlatParams& g2) {
  if (!g1.same_layout(g2)) throw ConfigError("cosine_similarity: parameter layouts differ");
  const double n1 = norm(g1), n2 = norm(g2);
  if (n1 < 1e-12 || n2 < 1e-12) return {0.0, true};
  const double c = dot(g1, g2) / (n1 * n2);
  return {std::clamp(c, -1.0, 1.0), false};
}

FlatParams select_term(const LossGradients& g, LossTerm term, const LossConfig& cfg) {
  switch (term) {
    case LossTerm::Policy: return g.policy;
    case LossTerm::Value: return g.value;
    case LossTerm::Total: break;
  }
  return g.total(cfg);
}

GradContext GradContext::from_checkpoint(const Checkpoint& ckpt) {
  const RunConfig cfg = ckpt.config();
  return {ckpt.params,    cfg.policy_spec(),  cfg.task_factory(), cfg.ppo.gamma,
          cfg.ppo.gae_lambda, cfg.ppo.n_steps, cfg.ppo.loss()};
}

namespace {

Batch pool(const GradContext& ctx, std::int64_t n, std::uint64_t stream) {
  const auto traj = collect_transitions(ctx.params, ctx.spec, ctx.factory, static_cast<std::size_t>(n), stream);
  return make_batch(traj, ctx.gamma, ctx.gae_lambda);
}

LossGradients estimate_one(const GradContext& ctx, std::int64_t batch_size, std::uint64_t stream) {
  const std::int64_t n = std::max(batch_size, ctx.n_steps);
  const Batch full = pool(ctx, n, stream);
  std::vector<std::size_t> idx(full.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(derive_seed(stream, {~0ULL}));
  // Partial Fisher-Yates: the first batch_size entries are a uniform subset.
  const auto k = static_cast<std::size_t>(batch_size);
  for (std::size_t i = 0; i < k && i + 1 < idx.size(); ++i)
    std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return ppo_loss_grad(full.select(idx), ctx.params, ctx.spec, ctx.loss, 1);
}

}  // namespace

LossGradients oracle_gradients(const GradContext& ctx, std::int64_t samples, std::uint64_t seed,
                               int workers) {
  if (samples < 1) throw ConfigError("oracle_gradient: samples must be >= 1");
  const Batch b = pool(ctx, samples, derive_seed(seed, {0}));
  return ppo_loss_grad(b, ctx.params, ctx.spec, ctx.loss, workers);
}

LossGradients oracle_gradients(const Checkpoint& ckpt, std::int64_t samples, std::uint64_t seed,
                               int workers) {
  return oracle_gradients(GradContext::from_checkpoint(ckpt), samples, seed, workers);
}

FlatParams oracle_gradient(const Checkpoint& ckpt, LossTerm term, std::int64_t samples,
                           std::uint64_t seed, int workers) {
  const GradContext ctx = GradContext::from_checkpoint(ckpt);
  return select_term(oracle_gradients(ctx, samples, seed, workers), term, ctx.loss);
}

std::vector<LossGradients> estimate_all_terms(const GradContext& ctx, std::int64_t batch_size,
                                              int n_estimates, std::uint64_t seed, int workers) {
  if (batch_size < 1 || n_estimates < 0) throw ConfigError("estimate_gradients: invalid sizes");
  std::vector<LossGradients> out(static_cast<std::size_t>(n_estimates));
  parallel_for(out.size(), workers, [&](std::size_t i) {
    out[i] = estimate_one(ctx, batch_size, derive_seed(seed, {i}));
  });
  return out;
}

std::vector<LossGradients> estimate_all_terms(const Checkpoint& ckpt, std::int64_t batch_size,
                                              int n_estimates, std::uint64_t seed, int workers) {
  return estimate_all_terms(GradContext::from_checkpoint(ckpt), batch_size, n_estimates, seed, workers);
}

std::vector<FlatParams> estimate_gradients(const Checkpoint& ckpt, LossTerm term,
                                           std::int64_t batch_size, int n_estimates,
                                           std::uint64_t seed, int workers) {
  const GradContext ctx = GradContext::from_checkpoint(ckpt);
  const auto all = estimate_all_terms(ctx, batch_size, n_estimates, seed, workers);
  std::vector<FlatParams> out;
  out.reserve(all.size());
  for (const auto& g : all) out.push_back(select_term(g, term, ctx.loss));
  return out;
}

CosineStats cosine_stats(const std::vector<double>& values, int degenerate) {
  CosineStats s;
  s.n = static_cast<int>(values.size());
  s.degenerate = degenerate;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

CosineStats pairwise_consistency(const Checkpoint& ckpt, LossTerm term, std::int64_t batch_size,
                                 int n_pairs, std::uint64_t seed, int workers) {
  const auto g = estimate_gradients(ckpt, term, batch_size, 2 * n_pairs, seed, workers);
  std::vector<double> values;
  int degenerate = 0;
  for (int k = 0; k < n_pairs; ++k) {
    const Cosine c = cosine_similarity(g[2 * k], g[2 * k + 1]);
    values.push_back(c.value);
    degenerate += c.degenerate;
  }
  return cosine_stats(values, degenerate);
}

std::vector<GradQualityRecord> analyze_run(const std::vector<Checkpoint>& series,
                                           const GradSimConfig& cfg) {
  cfg.validate();
  if (series.empty()) throw ConfigError("analyze_run: empty checkpoint series");
  std::vector<std::size_t> order(series.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return series[a].env_step < series[b].env_step;
  });
  std::vector<GradQualityRecord> out;
  for (std::size_t k : order) {
    const Checkpoint& ckpt = series[k];
    const GradContext ctx = GradContext::from_checkpoint(ckpt);
    const LossConfig lcfg = ctx.loss;
    LossGradients oracle;
    if (cfg.pairing == Pairing::Oracle)
      oracle = oracle_gradients(ctx, cfg.oracle_samples, derive_seed(cfg.seed, {k, 0}), cfg.workers);
    std::vector<std::vector<LossGradients>> estimates;
    for (auto b : cfg.batch_sizes)
      estimates.push_back(estimate_all_terms(ctx, b, cfg.n_estimates,
                                             derive_seed(cfg.seed, {k, 1, static_cast<std::uint64_t>(b)}),
                                             cfg.workers));
    for (LossTerm term : cfg.terms) {
      FlatParams og;
      if (cfg.pairing == Pairing::Oracle) og = select_term(oracle, term, lcfg);
      for (std::size_t bi = 0; bi < cfg.batch_sizes.size(); ++bi) {
        std::vector<FlatParams> g;
        for (const auto& e : estimates[bi]) g.push_back(select_term(e, term, lcfg));
        std::vector<double> values;
        int degenerate = 0;
        if (cfg.pairing == Pairing::Oracle) {
          for (const auto& gi : g) {
            const Cosine c = cosine_similarity(gi, og);
            values.push_back(c.value);
            degenerate += c.degenerate;
          }
        } else {
          for (std::size_t i = 0; i < g.size(); ++i)
            for (std::size_t j = i + 1; j < g.size(); ++j) {
              const Cosine c = cosine_similarity(g[i], g[j]);
              values.push_back(c.value);
              degenerate += c.degenerate;
            }
        }
        GradQualityRecord r;
        r.checkpoint = ckpt.id();
        r.env_step = ckpt.env_step;
        r.gradient_step = ckpt.gradient_step;
        r.term = term;
        r.batch_size = cfg.batch_sizes[bi];
        r.cos = cosine_stats(values, degenerate);
        r.oracle_norm = cfg.pairing == Pairing::Oracle ? norm(og) : 0.0;
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

CsvTable records_table(const std::vector<GradQualityRecord>& records) {
  CsvTable t;
  t.header = {"checkpoint", "env_step", "gradient_step", "term", "batch_size",
              "mean_cos",   "std_cos",  "n",             "oracle_norm"};
  for (const auto& r : records)
    t.add_row({r.checkpoint, std::to_string(r.env_step), std::to_string(r.gradient_step),
               std::string(to_string(r.term)), std::to_string(r.batch_size),
               format_double(r.cos.mean), format_double(r.cos.std), std::to_string(r.cos.n),
               format_double(r.oracle_norm)});
  return t;
}

}  // namespace actlab
