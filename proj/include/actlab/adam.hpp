#pragma once

#include <cstdint>
#include <vector>

#include "actlab/policy.hpp"

namespace actlab {

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;

  bool operator==(const AdamState&) const = default;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Rescales grad in place so its global norm is at most max_norm
// (factor max_norm / (norm + 1e-6) when exceeded). Returns the original norm.
double clip_grad_norm(FlatParams& grad, double max_norm);

// Bias-corrected Adam with the gradient pre-clipped to max_grad_norm
// (max_grad_norm <= 0 disables clipping).
void adam_step(FlatParams& params, FlatParams grad, AdamState& state, double lr,
               double max_grad_norm, const AdamConfig& cfg = {});

}  // namespace actlab
