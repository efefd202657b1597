#include "blocksync/optim.hpp"

#include <cmath>

#include "blocksync/errors.hpp"

namespace blocksync {

namespace {

void check_hyperparameters(double lr, double mu) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ArgumentError("learning rate must be positive and finite");
  if (!(mu >= 0.0 && mu < 1.0)) throw ArgumentError("momentum must lie in [0, 1)");
}

}  // namespace

SgdState::SgdState(std::size_t length, double lr, double mu) : velocity(length), learning_rate(lr), momentum(mu) {
  check_hyperparameters(lr, mu);
}

void sgd_step(ParamVector& params, const ParamVector& grad, SgdState& state) {
  require_same_length(params.size(), grad.size(), "sgd_step gradient");
  require_same_length(params.size(), state.velocity.size(), "sgd_step velocity");
  check_hyperparameters(state.learning_rate, state.momentum);
  if (!grad.all_finite()) throw NumericError("sgd_step: non-finite gradient");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double v = state.momentum * state.velocity[i] - state.learning_rate * grad[i];
    state.velocity[i] = v;
    params[i] += v;
  }
}

}  // namespace blocksync
