#include <doctest.h>

#include <cmath>
#include <numeric>

#include "blocksync/errors.hpp"
#include "blocksync/models.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace blocksync;

namespace {

// Relative-error floor for the gradient check: components whose true
// magnitude is below it are compared on an absolute scale.
constexpr double kGradFloor = 1e-5;

double grad_check(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
  const auto analytic = backward(spec, params, batch).gradient;
  const auto numeric = oracle::central_differences(
      [&](const ParamVector& p) { return forward_loss(spec, p, batch); }, params, 1e-5);
  return oracle::max_relative_error(analytic, numeric, kGradFloor);
}

}  // namespace

TEST_CASE("parameter counts") {
  CHECK(param_count(MlpSpec{{4, 3, 2}}) == 23);
  CHECK(param_count(LstmSpec{4, 3, 1, 2}) == 104);
  CHECK(param_count(LstmSpec{4, 3, 2, 2}) == 104 + 4 * (3 * (3 + 3) + 3));
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(validate(ModelSpec{MlpSpec{{4}}}), ArgumentError);
  CHECK_THROWS_AS(validate(ModelSpec{MlpSpec{{4, 0, 2}}}), ArgumentError);
  CHECK_THROWS_AS(validate(ModelSpec{LstmSpec{4, 3, 0, 2}}), ArgumentError);
  CHECK_THROWS_AS(validate(ModelSpec{LstmSpec{0, 3, 1, 2}}), ArgumentError);
}

TEST_CASE("init_params is deterministic with zero biases and forget bias one") {
  const ModelSpec lstm = LstmSpec{4, 3, 1, 2};
  Rng a(17), b(17);
  const auto p = init_params(lstm, a);
  CHECK(p.bitwise_equal(init_params(lstm, b)));
  // Layer layout: W [12 x 4], U [12 x 3], b [12] with gates i, f, g, o.
  const std::size_t bias = 12 * 4 + 12 * 3;
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(p[bias + k] == 0.0);
    CHECK(p[bias + 3 + k] == 1.0);
    CHECK(p[bias + 6 + k] == 0.0);
    CHECK(p[bias + 9 + k] == 0.0);
  }
  CHECK(p[102] == 0.0);
  CHECK(p[103] == 0.0);

  const ModelSpec mlp = MlpSpec{{4, 3, 2}};
  Rng c(17);
  const auto q = init_params(mlp, c);
  for (std::size_t i = 12; i < 15; ++i) CHECK(q[i] == 0.0);
  for (std::size_t i = 0; i < 12; ++i) CHECK(std::abs(q[i]) <= 0.5);
}

TEST_CASE("zero parameters give uniform posteriors") {
  Rng rng(1);
  for (const ModelSpec& spec : {ModelSpec{MlpSpec{{5, 4, 6}}}, ModelSpec{LstmSpec{5, 4, 2, 6}}}) {
    const auto batch = testutil::random_batch(rng, 9, 5, 6, 2);
    const ParamVector zero(param_count(spec));
    CHECK(forward_loss(spec, zero, batch) == doctest::Approx(std::log(6.0)).epsilon(1e-14));
    const auto pred = predict_frames(spec, zero, batch.inputs, batch.sequence_lengths);
    CHECK(std::all_of(pred.begin(), pred.end(), [](std::size_t c) { return c == 0; }));
  }
}

TEST_CASE("confident correct logits give near-zero loss") {
  const ModelSpec spec = MlpSpec{{2, 2}};
  const ParamVector p{100, 0, 0, 100, 0, 0};
  Batch b;
  b.inputs = FrameMatrix(2, 2);
  b.inputs(0, 0) = 1;
  b.inputs(1, 1) = 1;
  b.targets = {0, 1};
  CHECK(forward_loss(spec, p, b) < 1e-6);
}

TEST_CASE("predict_frames argmax and tie-break") {
  const ModelSpec spec = MlpSpec{{1, 2}};
  FrameMatrix x(1, 1);
  CHECK(predict_frames(spec, ParamVector{0, 0, 0.1, 0.9}, x) == std::vector<std::size_t>{1});
  CHECK(predict_frames(spec, ParamVector{0, 0, 0.5, 0.5}, x) == std::vector<std::size_t>{0});
}

TEST_CASE("forward_loss matches an independent straight-line implementation") {
  Rng rng(2024);
  for (int seed = 0; seed < 10; ++seed) {
    const MlpSpec mlp{{7, 5, 4, 3}};
    const LstmSpec lstm{7, 4, 2, 3};
    const auto batch = testutil::random_batch(rng, 12, 7, 3, 3);
    const auto pm = testutil::random_vector(rng, param_count(mlp), 1.0);
    const auto pl = testutil::random_vector(rng, param_count(lstm), 1.0);
    CHECK(forward_loss(mlp, pm, batch) == doctest::Approx(oracle::mlp_loss(mlp, pm, batch)).epsilon(1e-12));
    CHECK(forward_loss(lstm, pl, batch) == doctest::Approx(oracle::lstm_loss(lstm, pl, batch)).epsilon(1e-12));
  }
}

TEST_CASE("backward matches central finite differences") {
  Rng rng(77);
  for (int trial = 0; trial < 5; ++trial) {
    const ModelSpec mlp = MlpSpec{{8, 6, 4}};
    const ModelSpec deep = MlpSpec{{5, 4, 4, 3}};
    const ModelSpec lstm1 = LstmSpec{6, 5, 1, 3};
    const ModelSpec lstm2 = LstmSpec{4, 3, 2, 3};
    for (const auto& spec : {mlp, deep, lstm1, lstm2}) {
      const auto batch = testutil::random_batch(rng, 10, input_dim(spec), output_dim(spec), 2);
      const auto p = testutil::random_vector(rng, param_count(spec), 0.8);
      CAPTURE(describe(spec));
      CHECK(grad_check(spec, p, batch) <= 1e-5);
    }
  }
}

TEST_CASE("backward loss equals forward_loss bitwise") {
  Rng rng(8);
  for (const ModelSpec& spec : {ModelSpec{MlpSpec{{6, 5, 3}}}, ModelSpec{LstmSpec{6, 5, 2, 3}}}) {
    const auto batch = testutil::random_batch(rng, 10, 6, 3, 2);
    const auto p = testutil::random_vector(rng, param_count(spec), 1.0);
    CHECK(backward(spec, p, batch).loss == forward_loss(spec, p, batch));
  }
}

TEST_CASE("duplicating a batch leaves the gradient unchanged") {
  Rng rng(13);
  for (const ModelSpec& spec : {ModelSpec{MlpSpec{{6, 5, 3}}}, ModelSpec{LstmSpec{6, 5, 2, 3}}}) {
    const auto batch = testutil::random_batch(rng, 8, 6, 3, 2);
    Batch twice = batch;
    twice.inputs.rows *= 2;
    twice.inputs.data.insert(twice.inputs.data.end(), batch.inputs.data.begin(), batch.inputs.data.end());
    twice.targets.insert(twice.targets.end(), batch.targets.begin(), batch.targets.end());
    twice.sequence_lengths.insert(twice.sequence_lengths.end(), batch.sequence_lengths.begin(),
                                  batch.sequence_lengths.end());
    const auto p = testutil::random_vector(rng, param_count(spec), 1.0);
    const auto g1 = backward(spec, p, batch).gradient;
    const auto g2 = backward(spec, p, twice).gradient;
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g2[i] == doctest::Approx(g1[i]).epsilon(1e-12).scale(1e-12));
  }
}

TEST_CASE("softmax posteriors sum to one") {
  Rng rng(21);
  const ModelSpec spec = LstmSpec{4, 6, 2, 7};
  const auto batch = testutil::random_batch(rng, 30, 4, 7, 3);
  const auto p = testutil::random_vector(rng, param_count(spec), 3.0);
  const auto post = posteriors(spec, p, batch.inputs, batch.sequence_lengths);
  for (std::size_t r = 0; r < post.rows; ++r) {
    const auto row = post.row(r);
    CHECK(std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) <= 1e-12);
  }
}

TEST_CASE("loss is invariant to the order of independent sequences") {
  Rng rng(31);
  const ModelSpec spec = LstmSpec{3, 4, 2, 3};
  const auto batch = testutil::random_batch(rng, 12, 3, 3, 3);  // lengths 4, 4, 4
  const auto p = testutil::random_vector(rng, param_count(spec), 1.0);
  // Move the last sequence to the front.
  Batch rotated = batch;
  const std::size_t cols = 3, len = 4;
  std::rotate(rotated.inputs.data.begin(), rotated.inputs.data.end() - static_cast<std::ptrdiff_t>(len * cols),
              rotated.inputs.data.end());
  std::rotate(rotated.targets.begin(), rotated.targets.end() - static_cast<std::ptrdiff_t>(len),
              rotated.targets.end());
  CHECK(forward_loss(spec, p, rotated) ==
        doctest::Approx(forward_loss(spec, p, batch)).epsilon(1e-12));
}

// A one-layer LSTM on length-1 sequences with c0 = h0 = 0 computes
//   h = o * tanh(i * g).
// Input and output gates are saturated with bias 40 (sigmoid(40) == 1.0 in
// double precision), so h = tanh(tanh(a_g)). Using tanh(x) = 2*sigmoid(2x) - 1
// twice, the same function is an MLP with two sigmoid hidden layers:
//   s1 = sigmoid(2*W_g x + 2*b_g)
//   s2 = sigmoid(4*s1 - 2)                       (W2 = 4I, b2 = -2)
//   logits = 2*V s2 + (c - V*1)                  (since h = 2*s2 - 1)
TEST_CASE("length-1 LSTM with saturated gates equals an equivalent MLP") {
  Rng rng(55);
  const std::size_t in = 4, H = 3, K = 5;
  const LstmSpec lstm{in, H, 1, K};
  const MlpSpec mlp{{in, H, H, K}};
  ParamVector lp(param_count(lstm));
  const std::size_t w = 0, u = 4 * H * in, b = u + 4 * H * H, v = b + 4 * H, c = v + K * H;
  FrameMatrix wg(H, in);
  std::vector<double> bg(H);
  for (std::size_t k = 0; k < H; ++k) {
    for (std::size_t j = 0; j < in; ++j) {
      wg(k, j) = rng.uniform(-1, 1);
      lp[w + (2 * H + k) * in + j] = wg(k, j);
    }
    bg[k] = rng.uniform(-1, 1);
    lp[b + k] = 40.0;          // input gate
    lp[b + 2 * H + k] = bg[k]; // cell candidate
    lp[b + 3 * H + k] = 40.0;  // output gate
  }
  FrameMatrix vout(K, H);
  std::vector<double> cout(K);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t j = 0; j < H; ++j) lp[v + k * H + j] = vout(k, j) = rng.uniform(-2, 2);
    lp[c + k] = cout[k] = rng.uniform(-1, 1);
  }

  ParamVector mp(param_count(mlp));
  std::size_t pos = 0;
  for (std::size_t k = 0; k < H; ++k)
    for (std::size_t j = 0; j < in; ++j) mp[pos++] = 2.0 * wg(k, j);
  for (std::size_t k = 0; k < H; ++k) mp[pos++] = 2.0 * bg[k];
  for (std::size_t k = 0; k < H; ++k)
    for (std::size_t j = 0; j < H; ++j) mp[pos++] = k == j ? 4.0 : 0.0;
  for (std::size_t k = 0; k < H; ++k) mp[pos++] = -2.0;
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t j = 0; j < H; ++j) mp[pos++] = 2.0 * vout(k, j);
  for (std::size_t k = 0; k < K; ++k) {
    double row = 0.0;
    for (std::size_t j = 0; j < H; ++j) row += vout(k, j);
    mp[pos++] = cout[k] - row;
  }
  REQUIRE(pos == mp.size());

  Batch batch = testutil::random_batch(rng, 16, in, K, 16);  // 16 sequences of length 1
  CHECK(forward_loss(lstm, lp, batch) == doctest::Approx(forward_loss(mlp, mp, batch)).epsilon(1e-12));
}

TEST_CASE("model errors") {
  Rng rng(4);
  const ModelSpec spec = MlpSpec{{3, 2}};
  auto batch = testutil::random_batch(rng, 4, 3, 2);
  CHECK_THROWS_AS(forward_loss(spec, ParamVector(7), batch), DimensionError);
  CHECK_THROWS_AS(backward(spec, ParamVector(9), batch), DimensionError);
  batch.targets[0] = 2;
  CHECK_THROWS_AS(forward_loss(spec, ParamVector(8), batch), ArgumentError);
  CHECK_THROWS_AS(predict_frames(spec, ParamVector(8), FrameMatrix(2, 4)), DimensionError);
  Batch bad_lengths = testutil::random_batch(rng, 4, 3, 2);
  bad_lengths.sequence_lengths = {3};
  CHECK_THROWS_AS(forward_loss(spec, ParamVector(8), bad_lengths), DimensionError);
}
