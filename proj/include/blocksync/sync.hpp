#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include "blocksync/param_vector.hpp"

namespace blocksync {

/// Bookkeeping for blockwise model-update filtering.
///
///   avg(t)   = mean of the workers' local models
///   G(t)     = avg(t) - global(t-1)
///   delta(t) = block_momentum * delta(t-1) + block_lr * G(t)
///   global(t)= global(t-1) + delta(t)
///
/// With block_momentum = 0 and block_lr = 1 this is plain model averaging.
struct SyncState {
  ParamVector global_model;
  ParamVector delta;
  double block_momentum = 0.9;  // eta, in [0, 1)
  double block_lr = 1.0;        // zeta, > 0
  std::uint64_t block_index = 0;

  SyncState() = default;
  SyncState(ParamVector initial_global, double eta, double zeta);
};

/// One BMUF synchronization over the workers' local models.
SyncState bmuf_sync(const SyncState& state, std::span<const ParamVector> local_models);

/// Same as bmuf_sync, but with the local-model average already reduced
/// (e.g. by the sharded transport).
SyncState bmuf_apply(const SyncState& state, const ParamVector& averaged);

/// Plain model averaging: the mean of the local models.
ParamVector model_average_sync(std::span<const ParamVector> local_models);

/// Non-interference shadow models. They observe every global model produced
/// by synchronization and are never fed back into training.
///
///   ma(t)  = ma(t-1) + (global(t) - ma(t-1)) / t       (equal weights)
///   ema(t) = alpha * ema(t-1) + (1 - alpha) * global(t)
struct ShadowState {
  ParamVector ma_model;
  ParamVector ema_model;
  std::uint64_t sync_count = 0;
  double ema_rate = 0.99;  // alpha, in [0, 1]

  ShadowState() = default;
  /// `initial_global` seeds the EMA (the model every worker starts from). The
  /// MA has no value until the first update.
  ShadowState(const ParamVector& initial_global, double alpha);
};

ShadowState shadow_update(const ShadowState& shadow, const ParamVector& global_model);

enum class Strategy { kBmuf, kMa, kEma };

inline constexpr Strategy kAllStrategies[] = {Strategy::kBmuf, Strategy::kMa, Strategy::kEma};

std::string_view to_string(Strategy s) noexcept;
/// Throws ArgumentError on an unknown tag.
Strategy parse_strategy(std::string_view tag);

struct FinalModels {
  ParamVector bmuf;
  ParamVector ma;
  ParamVector ema;

  const ParamVector& get(Strategy s) const;
};

/// The three candidate deliverables. Throws StateError before the first sync.
FinalModels final_models(const ShadowState& shadow, const SyncState& sync);

}  // namespace blocksync
