#include <cmath>
#include <vector>

#include "model_impl.hpp"

namespace blocksync::detail {

std::size_t mlp_param_count(const MlpSpec& spec) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    n += spec.layer_sizes[l + 1] * spec.layer_sizes[l] + spec.layer_sizes[l + 1];
  }
  return n;
}

void mlp_init(const MlpSpec& spec, Rng& rng, ParamVector& params) {
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    const std::size_t in = spec.layer_sizes[l];
    const std::size_t out = spec.layer_sizes[l + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (std::size_t i = 0; i < in * out; ++i) params[offset + i] = rng.uniform(-scale, scale);
    offset += in * out + out;  // biases stay zero
  }
}

namespace {

// Activations of every layer for the whole batch; acts[0] is the input.
std::vector<FrameMatrix> mlp_forward(const MlpSpec& spec, const ParamVector& params,
                                     const FrameMatrix& inputs) {
  const auto& sizes = spec.layer_sizes;
  const std::size_t layers = sizes.size() - 1;
  std::vector<FrameMatrix> acts;
  acts.reserve(sizes.size());
  acts.push_back(inputs);
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = sizes[l];
    const std::size_t out = sizes[l + 1];
    const double* w = params.view().data() + offset;
    const double* b = w + in * out;
    FrameMatrix next(inputs.rows, out);
    for (std::size_t r = 0; r < inputs.rows; ++r) {
      auto y = next.row(r);
      affine(w, b, acts[l].row(r), y);
      if (l + 1 < layers) {
        for (double& v : y) v = sigmoid(v);
      }
    }
    acts.push_back(std::move(next));
    offset += in * out + out;
  }
  return acts;
}

}  // namespace

FrameMatrix mlp_logits(const MlpSpec& spec, const ParamVector& params, const FrameMatrix& inputs) {
  auto acts = mlp_forward(spec, params, inputs);
  return std::move(acts.back());
}

double mlp_loss(const MlpSpec& spec, const ParamVector& params, const Batch& batch, ParamVector* grad) {
  auto acts = mlp_forward(spec, params, batch.inputs);
  if (grad == nullptr) return softmax_cross_entropy(acts.back(), batch.targets, nullptr);

  FrameMatrix delta;
  const double loss = softmax_cross_entropy(acts.back(), batch.targets, &delta);

  const auto& sizes = spec.layer_sizes;
  *grad = ParamVector(params.size());
  std::size_t offset = params.size();
  for (std::size_t l = sizes.size() - 1; l-- > 0;) {
    const std::size_t in = sizes[l];
    const std::size_t out = sizes[l + 1];
    offset -= in * out + out;
    const double* w = params.view().data() + offset;
    double* gw = grad->view().data() + offset;
    double* gb = gw + in * out;

    FrameMatrix below(delta.rows, in);
    for (std::size_t r = 0; r < delta.rows; ++r) {
      const auto d = delta.row(r);
      outer_add(d, acts[l].row(r), gw);
      for (std::size_t o = 0; o < out; ++o) gb[o] += d[o];
      if (l > 0) gemv_transposed_add(w, d, below.row(r));
    }
    if (l > 0) {
      // Back through the sigmoid of layer l.
      for (std::size_t i = 0; i < below.data.size(); ++i) {
        const double s = acts[l].data[i];
        below.data[i] *= s * (1.0 - s);
      }
      delta = std::move(below);
    }
  }
  return loss;
}

}  // namespace blocksync::detail
