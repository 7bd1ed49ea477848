#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>

namespace actlab {

// Mixes a base seed with a path of integers into an independent stream seed.
// Every stochastic task (episode, landscape cell, gradient estimate) takes its
// stream from this function so results never depend on scheduling.
std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> path);

// Deterministic random stream with serializable state. Gaussian draws use a
// stateless Box-Muller transform so the engine state is the complete state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  std::size_t index(std::size_t n);  // uniform in [0, n)

  std::string serialize() const;
  static Rng deserialize(const std::string& text);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace actlab
