#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "blocksync/errors.hpp"
#include "blocksync/sync.hpp"
#include "test_util.hpp"

using namespace blocksync;

TEST_CASE("bmuf with eta=0, zeta=1 is model averaging") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(8), len = 1 + rng.below(50);
    std::vector<ParamVector> locals;
    for (std::size_t j = 0; j < n; ++j) locals.push_back(testutil::random_vector(rng, len, 5.0));
    SyncState state(testutil::random_vector(rng, len, 5.0), 0.0, 1.0);
    state.delta = testutil::random_vector(rng, len, 1.0);  // history must not matter
    const auto next = bmuf_sync(state, locals);
    CHECK(next.global_model.bitwise_equal(model_average_sync(locals)));
    CHECK(next.block_index == 1);
  }
}

TEST_CASE("bmuf first and second block by hand") {
  SyncState s(ParamVector{0}, 0.9, 1.0);
  const std::vector<ParamVector> locals{{1}, {3}};  // mean 2
  s = bmuf_sync(s, locals);
  CHECK(s.delta[0] == 2.0);
  CHECK(s.global_model[0] == 2.0);
  s = bmuf_sync(s, locals);
  // Hand recursion: G = 2 - 2 = 0, delta = 0.9*2 + 0 = 1.8, global = 2 + 1.8.
  CHECK(s.delta[0] == doctest::Approx(1.8).epsilon(1e-15));
  CHECK(s.global_model[0] == doctest::Approx(3.8).epsilon(1e-15));
}

TEST_CASE("bmuf matches the scalar recursion for arbitrary hyperparameters") {
  Rng rng(2);
  for (double eta : {0.0, 0.5, 0.9}) {
    for (double zeta : {0.5, 1.0, 1.7}) {
      double g = 0.3, d = 0.0;
      SyncState s(ParamVector{g}, eta, zeta);
      for (int t = 1; t <= 30; ++t) {
        const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
        s = bmuf_sync(s, std::vector<ParamVector>{{a}, {b}});
        const double avg = a + (b - a) / 2.0;
        const double G = avg - g;
        d = eta * d + zeta * G;
        g = g + d;
        CHECK(s.delta[0] == doctest::Approx(d).epsilon(1e-12));
        CHECK(s.global_model[0] == doctest::Approx(g).epsilon(1e-12).scale(1.0));
      }
    }
  }
}

TEST_CASE("bmuf with literally constant local models keeps correcting the overshoot") {
  // Continues the hand example: third block with the same mean 2.
  // G = 2 - 3.8 = -1.8, delta = 0.9 * 1.8 - 1.8 = -0.18, global = 3.62.
  SyncState s(ParamVector{0}, 0.9, 1.0);
  const std::vector<ParamVector> locals{{2}};
  for (int t = 0; t < 3; ++t) s = bmuf_sync(s, locals);
  CHECK(s.delta[0] == doctest::Approx(-0.18).epsilon(1e-12));
  CHECK(s.global_model[0] == doctest::Approx(3.62).epsilon(1e-12));
}

TEST_CASE("bmuf geometric decay when workers stop moving") {
  SyncState s(ParamVector{0.0, 1.0}, 0.9, 1.0);
  s = bmuf_sync(s, std::vector<ParamVector>{{2.0, -1.0}});
  const ParamVector delta1 = s.delta;
  for (int t = 2; t <= 50; ++t) {
    const std::vector<ParamVector> idle{s.global_model};
    s = bmuf_sync(s, idle);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(std::abs(s.delta[i] - std::pow(0.9, t - 1) * delta1[i]) <= 1e-12);
    }
  }
}

TEST_CASE("bmuf errors") {
  SyncState s(ParamVector{0, 0}, 0.5, 1.0);
  CHECK_THROWS_AS(bmuf_sync(s, std::vector<ParamVector>{}), ArgumentError);
  CHECK_THROWS_AS(bmuf_sync(s, std::vector<ParamVector>{{1}}), DimensionError);
  CHECK_THROWS_AS(SyncState(ParamVector{0}, 1.0, 1.0), ArgumentError);
  CHECK_THROWS_AS(SyncState(ParamVector{0}, 0.5, 0.0), ArgumentError);
}

TEST_CASE("model_average_sync examples") {
  CHECK(model_average_sync(std::vector<ParamVector>{{0}, {4}}) == ParamVector{2});
  const ParamVector v{1.5, -3, 7};
  CHECK(model_average_sync(std::vector<ParamVector>(5, v)).bitwise_equal(v));
}

TEST_CASE("shadow_update examples") {
  SUBCASE("first update") {
    const ParamVector init{0.25, -1.0};
    ShadowState sh(init, 0.9);
    const ParamVector g1{0.7, 3.1};
    sh = shadow_update(sh, g1);
    CHECK(sh.sync_count == 1);
    CHECK(sh.ma_model.bitwise_equal(g1));
    for (std::size_t i = 0; i < 2; ++i) CHECK(sh.ema_model[i] == doctest::Approx(0.9 * init[i] + 0.1 * g1[i]));
  }
  SUBCASE("alpha zero tracks the global model exactly") {
    Rng rng(3);
    ShadowState sh(ParamVector(4), 0.0);
    for (int t = 0; t < 10; ++t) {
      const auto g = testutil::random_vector(rng, 4, 3.0);
      sh = shadow_update(sh, g);
      CHECK(sh.ema_model.bitwise_equal(g));
    }
  }
  SUBCASE("two-step hand recursion") {
    ShadowState sh(ParamVector{1}, 0.5);
    sh = shadow_update(sh, ParamVector{1});
    CHECK(sh.ema_model[0] == 1.0);
    sh = shadow_update(sh, ParamVector{3});
    CHECK(sh.ma_model[0] == 2.0);
    CHECK(sh.ema_model[0] == 2.0);
  }
  CHECK_THROWS_AS(shadow_update(ShadowState(ParamVector{1}, 0.5), ParamVector{1, 2}), DimensionError);
  CHECK_THROWS_AS(ShadowState(ParamVector{1}, 1.5), ArgumentError);
}

TEST_CASE("final_models") {
  const ParamVector init{0, 0};
  SyncState sync(init, 0.0, 1.0);
  ShadowState sh(init, 0.0);
  CHECK_THROWS_AS(final_models(sh, sync), StateError);

  const std::vector<ParamVector> locals{{1, 2}, {3, 5}};
  sync = bmuf_sync(sync, locals);
  sh = shadow_update(sh, sync.global_model);
  const auto f = final_models(sh, sync);
  CHECK(f.bmuf.bitwise_equal(f.ma));
  CHECK(f.bmuf.bitwise_equal(f.ema));

  SUBCASE("ma equals the mean of the recorded history") {
    Rng rng(8);
    ShadowState s(ParamVector(3), 0.7);
    std::vector<ParamVector> history;
    for (int t = 0; t < 500; ++t) {
      history.push_back(testutil::random_vector(rng, 3, 10.0));
      s = shadow_update(s, history.back());
    }
    for (std::size_t i = 0; i < 3; ++i) {
      double sum = 0.0;
      for (const auto& h : history) sum += h[i];
      CHECK(std::abs(s.ma_model[i] - sum / 500.0) <= 1e-12);
    }
  }
  SUBCASE("alpha one freezes the ema") {
    Rng rng(9);
    const ParamVector start{0.1, 0.2, 0.3};
    ShadowState s(start, 1.0);
    for (int t = 0; t < 100; ++t) s = shadow_update(s, testutil::random_vector(rng, 3, 5.0));
    CHECK(s.ema_model.bitwise_equal(start));
  }
}

TEST_CASE("strategy tags") {
  for (Strategy s : kAllStrategies) CHECK(parse_strategy(to_string(s)) == s);
  CHECK_THROWS_AS(parse_strategy("swa"), ArgumentError);
}
