#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "blocksync/data.hpp"
#include "blocksync/errors.hpp"

using namespace blocksync;

namespace {

CorpusParams small_params() {
  CorpusParams p;
  p.num_speakers = 10;
  p.utterances_per_speaker = 3;
  p.frames_per_utterance = 7;
  p.base_dim = 3;
  p.num_classes = 4;
  return p;
}

std::set<std::size_t> speakers_of(const std::vector<Utterance>& utts) {
  std::set<std::size_t> s;
  for (const auto& u : utts) s.insert(u.speaker);
  return s;
}

bool disjoint(const std::set<std::size_t>& a, const std::set<std::size_t>& b) {
  return std::none_of(a.begin(), a.end(), [&](std::size_t x) { return b.count(x) > 0; });
}

}  // namespace

TEST_CASE("generate_corpus is deterministic and well formed") {
  Rng a(1), b(1);
  const auto c1 = generate_corpus(small_params(), a);
  const auto c2 = generate_corpus(small_params(), b);
  REQUIRE(c1.utterances.size() == 30);
  for (std::size_t i = 0; i < c1.utterances.size(); ++i) {
    const auto& u = c1.utterances[i];
    CHECK(u.id == i);
    CHECK(u.frames.rows == 7);
    CHECK(u.labels.size() == 7);
    CHECK(u.frames.data == c2.utterances[i].frames.data);
    CHECK(u.labels == c2.utterances[i].labels);
    for (auto l : u.labels) CHECK(l < 4);
  }
  auto p = small_params();
  p.num_classes = 1;
  Rng c(2);
  for (const auto& u : generate_corpus(p, c).utterances) {
    CHECK(std::all_of(u.labels.begin(), u.labels.end(), [](std::size_t l) { return l == 0; }));
  }
  p.num_speakers = 0;
  CHECK_THROWS_AS(generate_corpus(p, c), ArgumentError);
}

TEST_CASE("generated data is learnable by a nearest-class-mean classifier") {
  CorpusParams p;  // defaults
  Rng rng(10);
  const auto corpus = generate_corpus(p, rng);
  Rng split_rng(11);
  const auto split = split_by_speaker(corpus, {}, split_rng);

  // Class centroids from the training split, nearest centroid on validation.
  std::vector<std::vector<double>> centroid(p.num_classes, std::vector<double>(p.base_dim, 0.0));
  std::vector<double> count(p.num_classes, 0.0);
  for (const auto& u : split.train) {
    for (std::size_t t = 0; t < u.frames.rows; ++t) {
      for (std::size_t d = 0; d < p.base_dim; ++d) centroid[u.labels[t]][d] += u.frames(t, d);
      count[u.labels[t]] += 1.0;
    }
  }
  for (std::size_t c = 0; c < p.num_classes; ++c)
    for (auto& x : centroid[c]) x /= std::max(1.0, count[c]);
  std::size_t wrong = 0, total = 0;
  for (const auto& u : split.val) {
    for (std::size_t t = 0; t < u.frames.rows; ++t) {
      std::size_t best = 0;
      double best_d = 1e300;
      for (std::size_t c = 0; c < p.num_classes; ++c) {
        double d2 = 0.0;
        for (std::size_t d = 0; d < p.base_dim; ++d) d2 += (u.frames(t, d) - centroid[c][d]) * (u.frames(t, d) - centroid[c][d]);
        if (d2 < best_d) best_d = d2, best = c;
      }
      wrong += best != u.labels[t];
      ++total;
    }
  }
  const double fer = static_cast<double>(wrong) / static_cast<double>(total);
  MESSAGE("nearest-centroid validation FER " << fer);
  CHECK(fer < 1.0 - 1.0 / static_cast<double>(p.num_classes));
}

TEST_CASE("split_by_speaker keeps speakers disjoint") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    auto p = small_params();
    p.num_speakers = 3 + rng.below(20);
    const auto corpus = generate_corpus(p, rng);
    const auto split = split_by_speaker(corpus, {0.6, 0.2, 0.2}, rng);
    const auto tr = speakers_of(split.train), va = speakers_of(split.val), te = speakers_of(split.test);
    CHECK(disjoint(tr, va));
    CHECK(disjoint(tr, te));
    CHECK(disjoint(va, te));
    CHECK(split.train.size() + split.val.size() + split.test.size() == corpus.utterances.size());
  }
}

TEST_CASE("split_by_speaker sizes") {
  Rng rng(4);
  const auto corpus = generate_corpus(small_params(), rng);
  const auto s = split_by_speaker(corpus, {0.8, 0.1, 0.1}, rng);
  CHECK(speakers_of(s.train).size() == 8);
  CHECK(speakers_of(s.val).size() == 1);
  CHECK(speakers_of(s.test).size() == 1);
  const auto all = split_by_speaker(corpus, {1.0, 0.0, 0.0}, rng);
  CHECK(all.train.size() == corpus.utterances.size());
  CHECK(all.val.empty());
  CHECK(all.test.empty());

  CHECK_THROWS_AS(split_by_speaker(corpus, {0.5, 0.2, 0.2}, rng), ArgumentError);
  auto p = small_params();
  p.num_speakers = 2;
  CHECK_THROWS_AS(split_by_speaker(generate_corpus(p, rng), {}, rng), ArgumentError);
}

TEST_CASE("stack_frames shapes and labels") {
  FrameMatrix f(7, 2);
  for (std::size_t i = 0; i < f.data.size(); ++i) f.data[i] = static_cast<double>(i);
  const std::vector<std::size_t> labels{0, 1, 2, 3, 4, 5, 6};
  const auto s = stack_frames(f, labels, 3);
  CHECK(s.frames.rows == 2);
  CHECK(s.frames.cols == 6);
  CHECK(s.labels == std::vector<std::size_t>{2, 5});
  CHECK(std::vector<double>(s.frames.row(1).begin(), s.frames.row(1).end()) ==
        std::vector<double>{6, 7, 8, 9, 10, 11});

  FrameMatrix six(6, 2);
  CHECK(stack_frames(six, std::vector<std::size_t>(6), 3).frames.rows == 2);

  const auto id = stack_frames(f, labels, 1);
  CHECK(id.frames.data == f.data);
  CHECK(id.labels == labels);

  for (std::size_t T = 1; T < 12; ++T)
    for (std::size_t d = 1; d < 4; ++d)
      for (std::size_t k = 1; k < 5; ++k) {
        const auto out = stack_frames(FrameMatrix(T, d), std::vector<std::size_t>(T), k);
        CHECK(out.frames.rows == T / k);
        CHECK(out.frames.cols == k * d);
      }
  CHECK_THROWS_AS(stack_frames(f, labels, 0), ArgumentError);
}

TEST_CASE("shard_dataset") {
  Rng rng(1);
  std::vector<Utterance> utts(10);
  for (std::size_t i = 0; i < utts.size(); ++i) utts[i].id = i;

  const auto one = shard_dataset(utts, 1, rng);
  REQUIRE(one.size() == 1);
  CHECK(one[0].size() == 10);

  const auto eight = shard_dataset(utts, 8, rng);
  std::vector<std::size_t> sizes;
  std::multiset<std::size_t> ids;
  for (const auto& s : eight) {
    sizes.push_back(s.size());
    for (const auto& u : s) ids.insert(u.id);
  }
  CHECK(sizes == std::vector<std::size_t>{2, 2, 1, 1, 1, 1, 1, 1});
  CHECK(ids == std::multiset<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK_THROWS_AS(shard_dataset(utts, 0, rng), ArgumentError);
}

TEST_CASE("make_batch concatenates utterances as sequences") {
  Utterance a{0, 0, FrameMatrix(2, 3), {1, 2}};
  Utterance b{1, 0, FrameMatrix(3, 3), {0, 0, 1}};
  a.frames.data[0] = 5;
  const std::vector<Utterance> both{a, b};
  const auto batch = make_batch(both);
  CHECK(batch.inputs.rows == 5);
  CHECK(batch.inputs.data[0] == 5);
  CHECK(batch.sequence_lengths == std::vector<std::size_t>{2, 3});
  CHECK(batch.targets == std::vector<std::size_t>{1, 2, 0, 0, 1});
}

TEST_CASE("corpus text container round-trips") {
  Rng rng(3);
  const auto corpus = generate_corpus(small_params(), rng);
  std::stringstream ss;
  write_corpus(ss, corpus);
  const auto back = read_corpus(ss);
  REQUIRE(back.utterances.size() == corpus.utterances.size());
  CHECK(back.feature_dim == corpus.feature_dim);
  CHECK(back.num_classes == corpus.num_classes);
  for (std::size_t i = 0; i < back.utterances.size(); ++i) {
    CHECK(back.utterances[i].speaker == corpus.utterances[i].speaker);
    CHECK(back.utterances[i].labels == corpus.utterances[i].labels);
    CHECK(back.utterances[i].frames.data == corpus.utterances[i].frames.data);
  }
  std::stringstream bad("blocksync-corpus 1\ndim 2 classes 2 utterances 1\nutt 0 0 1\n0 1.5\n");
  CHECK_THROWS_AS(read_corpus(bad), IoError);
}
