#include <algorithm>
#include <cmath>
#include <numeric>

#include "blocksync/errors.hpp"
#include "model_impl.hpp"

namespace blocksync {

namespace detail {

double softmax_cross_entropy(const FrameMatrix& logits, std::span<const std::size_t> targets,
                             FrameMatrix* dlogits) {
  if (logits.rows == 0) throw ArgumentError("cross-entropy over an empty batch");
  const double n = static_cast<double>(logits.rows);
  if (dlogits != nullptr) *dlogits = FrameMatrix(logits.rows, logits.cols);
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const auto z = logits.row(r);
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - m);
    const double log_sum = std::log(sum);
    total += -(z[targets[r]] - m - log_sum);
    if (dlogits != nullptr) {
      auto d = dlogits->row(r);
      for (std::size_t k = 0; k < z.size(); ++k) d[k] = std::exp(z[k] - m) / sum / n;
      d[targets[r]] -= 1.0 / n;
    }
  }
  return total / n;
}

void softmax_rows(FrameMatrix& logits) {
  for (std::size_t r = 0; r < logits.rows; ++r) {
    auto z = logits.row(r);
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
      v = std::exp(v - m);
      sum += v;
    }
    for (double& v : z) v /= sum;
  }
}

void check_inputs(const ModelSpec& spec, const ParamVector& params, const FrameMatrix& inputs,
                  std::span<const std::size_t> sequence_lengths) {
  require_same_length(params.size(), param_count(spec), "model parameters");
  if (inputs.cols != input_dim(spec)) {
    throw DimensionError("input width " + std::to_string(inputs.cols) + " does not match model input " +
                         std::to_string(input_dim(spec)));
  }
  if (inputs.data.size() != inputs.rows * inputs.cols) throw DimensionError("malformed frame matrix");
  if (!sequence_lengths.empty()) {
    const auto total = std::accumulate(sequence_lengths.begin(), sequence_lengths.end(), std::size_t{0});
    if (total != inputs.rows) throw DimensionError("sequence lengths do not cover the batch");
  }
}

void check_batch(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
  check_inputs(spec, params, batch.inputs, batch.sequence_lengths);
  require_same_length(batch.targets.size(), batch.inputs.rows, "batch targets");
  const std::size_t classes = output_dim(spec);
  for (std::size_t t : batch.targets) {
    if (t >= classes) throw ArgumentError("target class out of range");
  }
}

}  // namespace detail

void validate(const ModelSpec& spec) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, MlpSpec>) {
          if (s.layer_sizes.size() < 2) throw ArgumentError("MLP needs at least input and output sizes");
          for (auto n : s.layer_sizes) {
            if (n == 0) throw ArgumentError("MLP layer sizes must be positive");
          }
        } else {
          if (s.num_layers == 0) throw ArgumentError("LSTM needs at least one layer");
          if (s.input_dim == 0 || s.hidden_dim == 0 || s.output_dim == 0) {
            throw ArgumentError("LSTM dimensions must be positive");
          }
        }
      },
      spec);
}

std::size_t param_count(const ModelSpec& spec) {
  return std::visit(
      [](const auto& s) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, MlpSpec>) {
          return detail::mlp_param_count(s);
        } else {
          return detail::lstm_param_count(s);
        }
      },
      spec);
}

std::size_t input_dim(const ModelSpec& spec) {
  if (const auto* m = std::get_if<MlpSpec>(&spec)) return m->layer_sizes.front();
  return std::get<LstmSpec>(spec).input_dim;
}

std::size_t output_dim(const ModelSpec& spec) {
  if (const auto* m = std::get_if<MlpSpec>(&spec)) return m->layer_sizes.back();
  return std::get<LstmSpec>(spec).output_dim;
}

std::string describe(const ModelSpec& spec) {
  if (const auto* m = std::get_if<MlpSpec>(&spec)) {
    std::string out = "mlp[";
    for (std::size_t i = 0; i < m->layer_sizes.size(); ++i) {
      if (i > 0) out += ',';
      out += std::to_string(m->layer_sizes[i]);
    }
    return out + "]";
  }
  const auto& l = std::get<LstmSpec>(spec);
  return "lstm(in=" + std::to_string(l.input_dim) + ",hidden=" + std::to_string(l.hidden_dim) +
         ",layers=" + std::to_string(l.num_layers) + ",out=" + std::to_string(l.output_dim) + ")";
}

ParamVector init_params(const ModelSpec& spec, Rng& rng) {
  validate(spec);
  ParamVector params(param_count(spec));
  if (const auto* m = std::get_if<MlpSpec>(&spec)) {
    detail::mlp_init(*m, rng, params);
  } else {
    detail::lstm_init(std::get<LstmSpec>(spec), rng, params);
  }
  return params;
}

namespace {

double loss_impl(const ModelSpec& spec, const ParamVector& params, const Batch& batch, ParamVector* grad) {
  validate(spec);
  detail::check_batch(spec, params, batch);
  if (const auto* m = std::get_if<MlpSpec>(&spec)) return detail::mlp_loss(*m, params, batch, grad);
  return detail::lstm_loss(std::get<LstmSpec>(spec), params, batch, grad);
}

}  // namespace

double forward_loss(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
  return loss_impl(spec, params, batch, nullptr);
}

LossAndGradient backward(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
  LossAndGradient out;
  out.loss = loss_impl(spec, params, batch, &out.gradient);
  return out;
}

FrameMatrix posteriors(const ModelSpec& spec, const ParamVector& params, const FrameMatrix& inputs,
                       std::span<const std::size_t> sequence_lengths) {
  validate(spec);
  detail::check_inputs(spec, params, inputs, sequence_lengths);
  FrameMatrix logits = std::holds_alternative<MlpSpec>(spec)
                           ? detail::mlp_logits(std::get<MlpSpec>(spec), params, inputs)
                           : detail::lstm_logits(std::get<LstmSpec>(spec), params, inputs, sequence_lengths);
  detail::softmax_rows(logits);
  return logits;
}

std::vector<std::size_t> predict_frames(const ModelSpec& spec, const ParamVector& params,
                                        const FrameMatrix& inputs,
                                        std::span<const std::size_t> sequence_lengths) {
  validate(spec);
  detail::check_inputs(spec, params, inputs, sequence_lengths);
  // Softmax is monotone, so argmax over logits; max_element keeps the first maximum.
  FrameMatrix logits = std::holds_alternative<MlpSpec>(spec)
                           ? detail::mlp_logits(std::get<MlpSpec>(spec), params, inputs)
                           : detail::lstm_logits(std::get<LstmSpec>(spec), params, inputs, sequence_lengths);
  std::vector<std::size_t> out(inputs.rows);
  for (std::size_t r = 0; r < inputs.rows; ++r) {
    const auto z = logits.row(r);
    out[r] = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
  }
  return out;
}

}  // namespace blocksync
