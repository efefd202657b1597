#include "blocksync/metrics.hpp"

#include "blocksync/errors.hpp"

namespace blocksync {

double frame_error_rate(std::span<const std::size_t> predictions, std::span<const std::size_t> labels) {
  require_same_length(predictions.size(), labels.size(), "frame_error_rate");
  if (labels.empty()) throw ArgumentError("frame_error_rate: no frames");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) wrong += predictions[i] != labels[i] ? 1 : 0;
  return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

double evaluate_fer(const ModelSpec& spec, const ParamVector& params, const Batch& eval_set) {
  const auto predictions = predict_frames(spec, params, eval_set.inputs, eval_set.sequence_lengths);
  return frame_error_rate(predictions, eval_set.targets);
}

std::vector<EvalRecord> evaluate_checkpoints(std::span<const Checkpoint> checkpoints, const Batch& eval_set,
                                             const ModelSpec& spec) {
  std::vector<EvalRecord> out;
  out.reserve(checkpoints.size());
  for (const auto& ckpt : checkpoints) {
    out.push_back({ckpt.strategy, ckpt.epoch, evaluate_fer(spec, ckpt.params, eval_set)});
  }
  return out;
}

}  // namespace blocksync
