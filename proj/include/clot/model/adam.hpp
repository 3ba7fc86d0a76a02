#pragma once

#include <vector>

#include "clot/model/model.hpp"

namespace clot::model {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;  // decoupled: theta -= lr * wd * theta
};

struct AdamState {
  AdamConfig cfg;
  std::size_t step = 0;
  std::vector<DenseMatrix> m, v;  // aligned with ModelParams tensor order

  void init_like(const ModelParams& params);
};

// Bias-corrected Adam with decoupled weight decay. Throws NumericError if a
// parameter goes non-finite.
void adam_step(ModelParams& params, const GradientStore& grads, AdamState& state);

}  // namespace clot::model
