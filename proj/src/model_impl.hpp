#pragma once

// Internal helpers shared by the MLP and LSTM implementations.

#include <cmath>
#include <span>

#include "blocksync/models.hpp"

namespace blocksync::detail {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// out[r] = sum_c W[r, c] * x[c] + b[r]
inline void affine(const double* w, const double* b, std::span<const double> x, std::span<double> out) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < out.size(); ++r) {
    double acc = b[r];
    const double* wr = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    out[r] = acc;
  }
}

// out[r] += sum_c W[r, c] * x[c]
inline void gemv_add(const double* w, std::span<const double> x, std::span<double> out) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < out.size(); ++r) {
    double acc = 0.0;
    const double* wr = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    out[r] += acc;
  }
}

// out[c] += sum_r W[r, c] * d[r]
inline void gemv_transposed_add(const double* w, std::span<const double> d, std::span<double> out) {
  const std::size_t cols = out.size();
  for (std::size_t r = 0; r < d.size(); ++r) {
    const double* wr = w + r * cols;
    const double dr = d[r];
    for (std::size_t c = 0; c < cols; ++c) out[c] += wr[c] * dr;
  }
}

// G[r, c] += d[r] * x[c]
inline void outer_add(std::span<const double> d, std::span<const double> x, double* g) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < d.size(); ++r) {
    double* gr = g + r * cols;
    const double dr = d[r];
    for (std::size_t c = 0; c < cols; ++c) gr[c] += dr * x[c];
  }
}

/// Mean softmax cross-entropy over the rows of `logits`. When `dlogits` is
/// non-null it receives d(mean loss)/d(logits).
double softmax_cross_entropy(const FrameMatrix& logits, std::span<const std::size_t> targets,
                             FrameMatrix* dlogits);

void softmax_rows(FrameMatrix& logits);

/// Checks parameter length, input width, targets and sequence lengths.
void check_batch(const ModelSpec& spec, const ParamVector& params, const Batch& batch);
void check_inputs(const ModelSpec& spec, const ParamVector& params, const FrameMatrix& inputs,
                  std::span<const std::size_t> sequence_lengths);

std::size_t mlp_param_count(const MlpSpec& spec);
void mlp_init(const MlpSpec& spec, Rng& rng, ParamVector& params);
FrameMatrix mlp_logits(const MlpSpec& spec, const ParamVector& params, const FrameMatrix& inputs);
double mlp_loss(const MlpSpec& spec, const ParamVector& params, const Batch& batch, ParamVector* grad);

std::size_t lstm_param_count(const LstmSpec& spec);
void lstm_init(const LstmSpec& spec, Rng& rng, ParamVector& params);
FrameMatrix lstm_logits(const LstmSpec& spec, const ParamVector& params, const FrameMatrix& inputs,
                        std::span<const std::size_t> sequence_lengths);
double lstm_loss(const LstmSpec& spec, const ParamVector& params, const Batch& batch, ParamVector* grad);

}  // namespace blocksync::detail
