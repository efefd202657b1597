#pragma once

#include <span>
#include <vector>

#include "blocksync/checkpoint.hpp"
#include "blocksync/data.hpp"
#include "blocksync/models.hpp"

namespace blocksync {

/// Fraction of frames whose prediction differs from the label.
/// Throws DimensionError on unequal lengths and ArgumentError on empty input.
double frame_error_rate(std::span<const std::size_t> predictions, std::span<const std::size_t> labels);

/// Frame error rate of `params` over every frame of `eval_set`.
double evaluate_fer(const ModelSpec& spec, const ParamVector& params, const Batch& eval_set);

struct EvalRecord {
  Strategy strategy = Strategy::kBmuf;
  double epoch = 0.0;
  double fer = 0.0;
};

/// One record per checkpoint, in checkpoint order. Never modifies the models.
std::vector<EvalRecord> evaluate_checkpoints(std::span<const Checkpoint> checkpoints, const Batch& eval_set,
                                             const ModelSpec& spec);

}  // namespace blocksync
