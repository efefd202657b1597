#include <cmath>
#include <vector>

#include "model_impl.hpp"

namespace blocksync::detail {

namespace {

std::size_t layer_input(const LstmSpec& spec, std::size_t l) {
  return l == 0 ? spec.input_dim : spec.hidden_dim;
}

std::size_t layer_params(const LstmSpec& spec, std::size_t l) {
  const std::size_t h = spec.hidden_dim;
  return 4 * h * layer_input(spec, l) + 4 * h * h + 4 * h;
}

// Views into the flat parameter (or gradient) vector for one LSTM layer.
template <typename T>
struct LayerView {
  T* w;  // [4H x in]
  T* u;  // [4H x H]
  T* b;  // [4H]
};

template <typename T>
LayerView<T> layer_view(const LstmSpec& spec, T* base, std::size_t l) {
  std::size_t offset = 0;
  for (std::size_t k = 0; k < l; ++k) offset += layer_params(spec, k);
  const std::size_t h = spec.hidden_dim;
  T* w = base + offset;
  T* u = w + 4 * h * layer_input(spec, l);
  T* b = u + 4 * h * h;
  return {w, u, b};
}

std::vector<std::size_t> sequence_starts(std::span<const std::size_t> lengths, std::size_t rows) {
  std::vector<std::size_t> starts;
  if (lengths.empty()) {
    starts = {0, rows};
    return starts;
  }
  std::size_t s = 0;
  starts.push_back(0);
  for (std::size_t len : lengths) {
    s += len;
    starts.push_back(s);
  }
  return starts;
}

struct LayerCache {
  FrameMatrix gates;  // post-activation i, f, g, o: [rows x 4H]
  FrameMatrix cell;   // [rows x H]
  FrameMatrix cell_tanh;
  FrameMatrix hidden;
};

LayerCache layer_forward(const LstmSpec& spec, const LayerView<const double>& p, const FrameMatrix& x,
                         const std::vector<std::size_t>& starts) {
  const std::size_t H = spec.hidden_dim;
  LayerCache cache{FrameMatrix(x.rows, 4 * H), FrameMatrix(x.rows, H), FrameMatrix(x.rows, H),
                   FrameMatrix(x.rows, H)};
  const std::vector<double> zeros(H, 0.0);
  for (std::size_t s = 0; s + 1 < starts.size(); ++s) {
    for (std::size_t t = starts[s]; t < starts[s + 1]; ++t) {
      const bool first = t == starts[s];
      std::span<const double> h_prev = first ? std::span<const double>(zeros) : cache.hidden.row(t - 1);
      std::span<const double> c_prev = first ? std::span<const double>(zeros) : cache.cell.row(t - 1);
      auto a = cache.gates.row(t);
      affine(p.w, p.b, x.row(t), a);
      gemv_add(p.u, h_prev, a);
      auto c = cache.cell.row(t);
      auto tc = cache.cell_tanh.row(t);
      auto h = cache.hidden.row(t);
      for (std::size_t k = 0; k < H; ++k) {
        const double ig = sigmoid(a[k]);
        const double fg = sigmoid(a[H + k]);
        const double gg = std::tanh(a[2 * H + k]);
        const double og = sigmoid(a[3 * H + k]);
        a[k] = ig;
        a[H + k] = fg;
        a[2 * H + k] = gg;
        a[3 * H + k] = og;
        c[k] = fg * c_prev[k] + ig * gg;
        tc[k] = std::tanh(c[k]);
        h[k] = og * tc[k];
      }
    }
  }
  return cache;
}

struct Forward {
  std::vector<LayerCache> layers;
  FrameMatrix logits;
};

Forward lstm_forward(const LstmSpec& spec, const ParamVector& params, const FrameMatrix& inputs,
                     const std::vector<std::size_t>& starts) {
  Forward fwd;
  const double* base = params.view().data();
  for (std::size_t l = 0; l < spec.num_layers; ++l) {
    const FrameMatrix& x = l == 0 ? inputs : fwd.layers.back().hidden;
    fwd.layers.push_back(layer_forward(spec, layer_view(spec, base, l), x, starts));
  }
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec.num_layers; ++l) offset += layer_params(spec, l);
  const double* v = base + offset;
  const double* c = v + spec.output_dim * spec.hidden_dim;
  const FrameMatrix& top = fwd.layers.back().hidden;
  fwd.logits = FrameMatrix(inputs.rows, spec.output_dim);
  for (std::size_t r = 0; r < inputs.rows; ++r) affine(v, c, top.row(r), fwd.logits.row(r));
  return fwd;
}

}  // namespace

std::size_t lstm_param_count(const LstmSpec& spec) {
  std::size_t n = 0;
  for (std::size_t l = 0; l < spec.num_layers; ++l) n += layer_params(spec, l);
  return n + spec.output_dim * spec.hidden_dim + spec.output_dim;
}

void lstm_init(const LstmSpec& spec, Rng& rng, ParamVector& params) {
  const std::size_t H = spec.hidden_dim;
  double* base = params.view().data();
  for (std::size_t l = 0; l < spec.num_layers; ++l) {
    auto p = layer_view(spec, base, l);
    const std::size_t in = layer_input(spec, l);
    const double scale = 1.0 / std::sqrt(static_cast<double>(in + H));
    for (std::size_t i = 0; i < 4 * H * in; ++i) p.w[i] = rng.uniform(-scale, scale);
    for (std::size_t i = 0; i < 4 * H * H; ++i) p.u[i] = rng.uniform(-scale, scale);
    for (std::size_t k = 0; k < H; ++k) p.b[H + k] = 1.0;  // forget gate
  }
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec.num_layers; ++l) offset += layer_params(spec, l);
  const double scale = 1.0 / std::sqrt(static_cast<double>(H));
  for (std::size_t i = 0; i < spec.output_dim * H; ++i) base[offset + i] = rng.uniform(-scale, scale);
}

FrameMatrix lstm_logits(const LstmSpec& spec, const ParamVector& params, const FrameMatrix& inputs,
                        std::span<const std::size_t> sequence_lengths) {
  return lstm_forward(spec, params, inputs, sequence_starts(sequence_lengths, inputs.rows)).logits;
}

double lstm_loss(const LstmSpec& spec, const ParamVector& params, const Batch& batch, ParamVector* grad) {
  const auto starts = sequence_starts(batch.sequence_lengths, batch.inputs.rows);
  Forward fwd = lstm_forward(spec, params, batch.inputs, starts);
  if (grad == nullptr) return softmax_cross_entropy(fwd.logits, batch.targets, nullptr);

  FrameMatrix dlogits;
  const double loss = softmax_cross_entropy(fwd.logits, batch.targets, &dlogits);

  const std::size_t H = spec.hidden_dim;
  const std::size_t rows = batch.inputs.rows;
  *grad = ParamVector(params.size());
  const double* base = params.view().data();
  double* gbase = grad->view().data();

  // Output layer.
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec.num_layers; ++l) offset += layer_params(spec, l);
  const double* v = base + offset;
  double* gv = gbase + offset;
  double* gc = gv + spec.output_dim * H;
  FrameMatrix dhidden(rows, H);
  const FrameMatrix& top = fwd.layers.back().hidden;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto d = dlogits.row(r);
    outer_add(d, top.row(r), gv);
    for (std::size_t o = 0; o < spec.output_dim; ++o) gc[o] += d[o];
    gemv_transposed_add(v, d, dhidden.row(r));
  }

  std::vector<double> dh_next(H), dc_next(H), da(4 * H);
  const std::vector<double> zeros(H, 0.0);
  for (std::size_t l = spec.num_layers; l-- > 0;) {
    const LayerCache& cache = fwd.layers[l];
    const FrameMatrix& x = l == 0 ? batch.inputs : fwd.layers[l - 1].hidden;
    const auto p = layer_view(spec, base, l);
    auto g = layer_view(spec, gbase, l);
    FrameMatrix dx(rows, l == 0 ? 0 : H);

    for (std::size_t s = 0; s + 1 < starts.size(); ++s) {
      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      std::fill(dc_next.begin(), dc_next.end(), 0.0);
      for (std::size_t t = starts[s + 1]; t-- > starts[s];) {
        const bool first = t == starts[s];
        std::span<const double> h_prev = first ? std::span<const double>(zeros) : cache.hidden.row(t - 1);
        std::span<const double> c_prev = first ? std::span<const double>(zeros) : cache.cell.row(t - 1);
        const auto gates = cache.gates.row(t);
        const auto tc = cache.cell_tanh.row(t);
        const auto dh_out = dhidden.row(t);
        for (std::size_t k = 0; k < H; ++k) {
          const double ig = gates[k], fg = gates[H + k], gg = gates[2 * H + k], og = gates[3 * H + k];
          const double dh = dh_out[k] + dh_next[k];
          const double dc = dc_next[k] + dh * og * (1.0 - tc[k] * tc[k]);
          da[k] = dc * gg * ig * (1.0 - ig);
          da[H + k] = dc * c_prev[k] * fg * (1.0 - fg);
          da[2 * H + k] = dc * ig * (1.0 - gg * gg);
          da[3 * H + k] = dh * tc[k] * og * (1.0 - og);
          dc_next[k] = dc * fg;
        }
        outer_add(da, x.row(t), g.w);
        outer_add(da, h_prev, g.u);
        for (std::size_t k = 0; k < 4 * H; ++k) g.b[k] += da[k];
        if (l > 0) gemv_transposed_add(p.w, da, dx.row(t));
        std::fill(dh_next.begin(), dh_next.end(), 0.0);
        gemv_transposed_add(p.u, da, dh_next);
      }
    }
    if (l > 0) dhidden = std::move(dx);
  }
  return loss;
}

}  // namespace blocksync::detail
