#include "blocksync/sync.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "blocksync/errors.hpp"

namespace blocksync {

SyncState::SyncState(ParamVector initial_global, double eta, double zeta)
    : global_model(std::move(initial_global)),
      delta(global_model.size()),
      block_momentum(eta),
      block_lr(zeta) {
  if (!(eta >= 0.0 && eta < 1.0)) throw ArgumentError("block momentum must lie in [0, 1)");
  if (!(zeta > 0.0) || !std::isfinite(zeta)) throw ArgumentError("block learning rate must be positive");
}

SyncState bmuf_apply(const SyncState& state, const ParamVector& averaged) {
  const std::size_t n = state.global_model.size();
  require_same_length(state.delta.size(), n, "bmuf delta");
  require_same_length(averaged.size(), n, "bmuf_sync local model");
  const double eta = state.block_momentum;
  const double zeta = state.block_lr;

  SyncState next = state;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = averaged[i] - state.global_model[i];
    const double filtered = eta * state.delta[i];
    next.delta[i] = filtered + zeta * g;
    // global(t-1) + delta(t) rewritten as avg(t) + (eta*delta(t-1) + (zeta-1)*G(t)).
    // Algebraically identical; with eta = 0, zeta = 1 the correction is exactly
    // zero and the new global model is the average bit for bit.
    const double correction = filtered + (zeta - 1.0) * g;
    next.global_model[i] = correction == 0.0 ? averaged[i] : averaged[i] + correction;
  }
  ++next.block_index;
  return next;
}

SyncState bmuf_sync(const SyncState& state, std::span<const ParamVector> local_models) {
  if (local_models.empty()) throw ArgumentError("bmuf_sync: no local models");
  for (const auto& m : local_models) require_same_length(m.size(), state.global_model.size(), "bmuf_sync");
  return bmuf_apply(state, mean_reduce(local_models));
}

ParamVector model_average_sync(std::span<const ParamVector> local_models) {
  return mean_reduce(local_models);
}

ShadowState::ShadowState(const ParamVector& initial_global, double alpha)
    : ma_model(initial_global.size()), ema_model(initial_global), ema_rate(alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ArgumentError("EMA rate must lie in [0, 1]");
}

ShadowState shadow_update(const ShadowState& shadow, const ParamVector& global_model) {
  const std::size_t n = global_model.size();
  require_same_length(shadow.ma_model.size(), n, "shadow_update MA");
  require_same_length(shadow.ema_model.size(), n, "shadow_update EMA");
  const double alpha = shadow.ema_rate;

  ShadowState next = shadow;
  next.sync_count = shadow.sync_count + 1;
  const double count = static_cast<double>(next.sync_count);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = global_model[i];
    if (shadow.sync_count == 0) {
      next.ma_model[i] = g;
    } else {
      next.ma_model[i] = shadow.ma_model[i] + (g - shadow.ma_model[i]) / count;
    }
    // A two-point convex combination; clamping only strips rounding that
    // would step outside [min, max] of its endpoints.
    const double prev = shadow.ema_model[i];
    const double mixed = alpha * prev + (1.0 - alpha) * g;
    next.ema_model[i] = std::clamp(mixed, std::min(prev, g), std::max(prev, g));
  }
  return next;
}

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::kBmuf:
      return "bmuf";
    case Strategy::kMa:
      return "ma";
    case Strategy::kEma:
      return "ema";
  }
  return "?";
}

Strategy parse_strategy(std::string_view tag) {
  for (Strategy s : kAllStrategies) {
    if (to_string(s) == tag) return s;
  }
  throw ArgumentError("unknown strategy tag '" + std::string(tag) + "'");
}

const ParamVector& FinalModels::get(Strategy s) const {
  switch (s) {
    case Strategy::kBmuf:
      return bmuf;
    case Strategy::kMa:
      return ma;
    case Strategy::kEma:
      return ema;
  }
  throw ArgumentError("unknown strategy");
}

FinalModels final_models(const ShadowState& shadow, const SyncState& sync) {
  if (shadow.sync_count == 0 || sync.block_index == 0) {
    throw StateError("final_models: no synchronization has happened yet");
  }
  return {sync.global_model, shadow.ma_model, shadow.ema_model};
}

}  // namespace blocksync
