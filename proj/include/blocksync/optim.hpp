#pragma once

#include "blocksync/param_vector.hpp"

namespace blocksync {

/// Classical momentum SGD, one instance per worker.
struct SgdState {
  ParamVector velocity;
  double learning_rate = 0.1;
  double momentum = 0.9;

  SgdState() = default;
  SgdState(std::size_t length, double lr, double mu);
};

/// velocity' = momentum * velocity - learning_rate * grad
/// params'   = params + velocity'
/// Updates `params` and `state` in place.
void sgd_step(ParamVector& params, const ParamVector& grad, SgdState& state);

}  // namespace blocksync
