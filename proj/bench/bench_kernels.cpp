// Serial reference vs OpenMP kernels. Arguments are worker counts.
#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>

#include "actlab/landscape.hpp"
#include "actlab/loss.hpp"
#include "actlab/policy.hpp"
#include "actlab/ppo.hpp"

using namespace actlab;

namespace {

const PolicySpec kSpec{3, 1, {64, 64}};

Batch random_batch(std::size_t n) {
  std::mt19937_64 g(1);
  std::normal_distribution<double> d(0.0, 1.0);
  Batch b;
  b.obs_dim = kSpec.obs_dim;
  b.act_dim = kSpec.act_dim;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < b.obs_dim; ++k) b.observations.push_back(d(g));
    b.actions.push_back(d(g));
    b.old_log_probs.push_back(-1.0 + 0.1 * d(g));
    b.advantages.push_back(d(g));
    b.returns.push_back(d(g));
    b.old_values.push_back(0.0);
  }
  return b;
}

const Batch& batch() {
  static const Batch b = random_batch(2048);
  return b;
}

const FlatParams& params() {
  static const FlatParams p = [] {
    Rng r(3);
    return init_params(kSpec, r);
  }();
  return p;
}

void BM_LossGradReference(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(reference::ppo_loss_grad(batch(), params(), kSpec, {}));
  state.SetItemsProcessed(state.iterations() * batch().size());
}

void BM_LossGradParallel(benchmark::State& state) {
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(ppo_loss_grad(batch(), params(), kSpec, {}, workers));
  state.SetItemsProcessed(state.iterations() * batch().size());
}

const Checkpoint& checkpoint() {
  static const Checkpoint c = [] {
    RunConfig cfg;
    cfg.env = default_env_config("pendulum");
    cfg.actuation.bounds = default_action_bounds(ActuationKind::Torque, cfg.env.spec);
    cfg.ppo.total_env_steps = 0;
    return Trainer(cfg, 0).checkpoint();
  }();
  return c;
}

void BM_LandscapeGrid(benchmark::State& state) {
  LandscapeConfig cfg;
  cfg.resolution = 5;
  cfg.samples_per_cell = 1000;
  cfg.workers = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(compute_grid(checkpoint(), cfg));
  state.SetItemsProcessed(state.iterations() * 25);
}

void worker_args(benchmark::internal::Benchmark* b) {
  const int max = omp_get_max_threads();
  for (int w = 1; w < max; w *= 2) b->Arg(w);
  b->Arg(max);
}

}  // namespace

BENCHMARK(BM_LossGradReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LossGradParallel)->Apply(worker_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LandscapeGrid)->Apply(worker_args)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
