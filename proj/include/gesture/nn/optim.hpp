#pragma once

#include <cstdint>
#include <vector>

#include "gesture/nn/layers.hpp"

namespace gesture::nn {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

/// One bias-corrected Adam update of `params` in place. Moment buffers are
/// created on the first call; later calls must pass matching shapes.
void adam_step(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads, AdamState& state,
               const AdamOptions& options);

/// Same update driven by each parameter's accumulated gradient.
void adam_step(const std::vector<Parameter*>& params, AdamState& state, const AdamOptions& options);

}  // namespace gesture::nn
