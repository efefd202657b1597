#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "blocksync/param_vector.hpp"
#include "blocksync/rng.hpp"

namespace blocksync {

/// Row-major [rows x cols] matrix of 64-bit reals.
struct FrameMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  FrameMatrix() = default;
  FrameMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
};

/// Frames of one or more independent sequences laid out back to back.
/// `sequence_lengths` sums to inputs.rows; an empty list means a single
/// sequence. Recurrent state is reset at every sequence start.
struct Batch {
  FrameMatrix inputs;
  std::vector<std::size_t> targets;
  std::vector<std::size_t> sequence_lengths;
};

/// Feed-forward net: sigmoid hidden layers, softmax output.
/// Layout per layer: W [out x in] row-major, then bias [out].
struct MlpSpec {
  std::vector<std::size_t> layer_sizes;
};

/// Stack of vanilla LSTM layers (no peepholes, no projection) followed by one
/// fully connected layer and softmax.
/// Layout per LSTM layer: W [4H x in], U [4H x H], b [4H], gate blocks in the
/// order input, forget, cell, output. Then V [out x H], c [out].
struct LstmSpec {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t num_layers = 2;
  std::size_t output_dim = 0;
};

using ModelSpec = std::variant<MlpSpec, LstmSpec>;

struct LossAndGradient {
  double loss = 0.0;
  ParamVector gradient;
};

/// Throws ArgumentError when the spec violates its invariants.
void validate(const ModelSpec& spec);

std::size_t param_count(const ModelSpec& spec);
std::size_t input_dim(const ModelSpec& spec);
std::size_t output_dim(const ModelSpec& spec);
std::string describe(const ModelSpec& spec);

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases zero, except the LSTM
/// forget-gate bias which starts at +1.
ParamVector init_params(const ModelSpec& spec, Rng& rng);

/// Mean cross-entropy over every frame in the batch.
double forward_loss(const ModelSpec& spec, const ParamVector& params, const Batch& batch);

/// Loss (bitwise equal to forward_loss) and its exact gradient. LSTMs use full
/// backpropagation through time inside each sequence.
LossAndGradient backward(const ModelSpec& spec, const ParamVector& params, const Batch& batch);

/// Softmax posteriors, one row per frame.
FrameMatrix posteriors(const ModelSpec& spec, const ParamVector& params, const FrameMatrix& inputs,
                       std::span<const std::size_t> sequence_lengths = {});

/// Argmax class per frame; ties go to the lowest index.
std::vector<std::size_t> predict_frames(const ModelSpec& spec, const ParamVector& params,
                                        const FrameMatrix& inputs,
                                        std::span<const std::size_t> sequence_lengths = {});

}  // namespace blocksync
