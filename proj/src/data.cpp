#include "blocksync/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include "blocksync/errors.hpp"
#include "blocksync/text.hpp"

namespace blocksync {

Corpus generate_corpus(const CorpusParams& p, Rng& rng) {
  if (p.num_speakers == 0 || p.utterances_per_speaker == 0 || p.frames_per_utterance == 0 || p.base_dim == 0 ||
      p.num_classes == 0) {
    throw ArgumentError("generate_corpus: all counts must be at least 1");
  }
  Rng class_rng = rng.fork(1);
  Rng speaker_rng = rng.fork(2);
  Rng frame_rng = rng.fork(3);

  FrameMatrix class_means(p.num_classes, p.base_dim);
  for (double& v : class_means.data) v = p.class_separation * class_rng.normal();
  FrameMatrix speaker_offsets(p.num_speakers, p.base_dim);
  for (double& v : speaker_offsets.data) v = p.speaker_spread * speaker_rng.normal();

  Corpus corpus;
  corpus.feature_dim = p.base_dim;
  corpus.num_classes = p.num_classes;
  corpus.utterances.reserve(p.num_speakers * p.utterances_per_speaker);
  for (std::size_t s = 0; s < p.num_speakers; ++s) {
    for (std::size_t u = 0; u < p.utterances_per_speaker; ++u) {
      Utterance utt;
      utt.id = corpus.utterances.size();
      utt.speaker = s;
      utt.frames = FrameMatrix(p.frames_per_utterance, p.base_dim);
      utt.labels.resize(p.frames_per_utterance);
      std::size_t label = frame_rng.below(p.num_classes);
      for (std::size_t t = 0; t < p.frames_per_utterance; ++t) {
        if (t > 0 && frame_rng.bernoulli(p.label_change_prob)) label = frame_rng.below(p.num_classes);
        utt.labels[t] = label;
        auto row = utt.frames.row(t);
        for (std::size_t d = 0; d < p.base_dim; ++d) {
          row[d] = class_means(label, d) + speaker_offsets(s, d) + p.noise * frame_rng.normal();
        }
      }
      corpus.utterances.push_back(std::move(utt));
    }
  }
  return corpus;
}

CorpusSplit split_by_speaker(const Corpus& corpus, const SplitSpec& spec, Rng& rng) {
  if (spec.train < 0.0 || spec.val < 0.0 || spec.test < 0.0 ||
      std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) {
    throw ArgumentError("split fractions must be non-negative and sum to 1");
  }
  std::vector<std::size_t> speakers;
  for (const auto& u : corpus.utterances) speakers.push_back(u.speaker);
  std::sort(speakers.begin(), speakers.end());
  speakers.erase(std::unique(speakers.begin(), speakers.end()), speakers.end());
  if (speakers.size() < 3) throw ArgumentError("split_by_speaker needs at least 3 speakers");
  rng.shuffle(speakers.begin(), speakers.end());

  const auto total = speakers.size();
  const auto round_half_up = [](double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); };
  const std::size_t n_train = std::min(total, round_half_up(spec.train * static_cast<double>(total)));
  const std::size_t n_val = std::min(total - n_train, round_half_up(spec.val * static_cast<double>(total)));

  // 0 = train, 1 = val, 2 = test, indexed by speaker id.
  const std::size_t max_speaker = speakers.empty() ? 0 : *std::max_element(speakers.begin(), speakers.end());
  std::vector<int> assignment(max_speaker + 1, 2);
  for (std::size_t i = 0; i < n_train; ++i) assignment[speakers[i]] = 0;
  for (std::size_t i = n_train; i < n_train + n_val; ++i) assignment[speakers[i]] = 1;

  CorpusSplit out;
  for (const auto& u : corpus.utterances) {
    switch (assignment[u.speaker]) {
      case 0:
        out.train.push_back(u);
        break;
      case 1:
        out.val.push_back(u);
        break;
      default:
        out.test.push_back(u);
    }
  }
  return out;
}

StackedFrames stack_frames(const FrameMatrix& frames, std::span<const std::size_t> labels, std::size_t k) {
  if (k == 0) throw ArgumentError("stack_frames: k must be at least 1");
  require_same_length(labels.size(), frames.rows, "stack_frames labels");
  const std::size_t groups = frames.rows / k;
  StackedFrames out{FrameMatrix(groups, k * frames.cols), std::vector<std::size_t>(groups)};
  for (std::size_t g = 0; g < groups; ++g) {
    auto dst = out.frames.row(g);
    for (std::size_t j = 0; j < k; ++j) {
      const auto src = frames.row(g * k + j);
      std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(j * frames.cols));
    }
    out.labels[g] = labels[g * k + k - 1];
  }
  return out;
}

Utterance stack_utterance(const Utterance& utt, std::size_t k) {
  auto stacked = stack_frames(utt.frames, utt.labels, k);
  return Utterance{utt.id, utt.speaker, std::move(stacked.frames), std::move(stacked.labels)};
}

std::vector<std::vector<Utterance>> shard_dataset(std::span<const Utterance> split, std::size_t n, Rng& rng) {
  if (n == 0) throw ArgumentError("shard_dataset: need at least one shard");
  std::vector<std::size_t> order(split.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order.begin(), order.end());
  std::vector<std::vector<Utterance>> shards(n);
  for (std::size_t i = 0; i < order.size(); ++i) shards[i % n].push_back(split[order[i]]);
  return shards;
}

Batch make_batch(std::span<const Utterance* const> utts) {
  Batch batch;
  if (utts.empty()) return batch;
  const std::size_t dim = utts.front()->frames.cols;
  std::size_t rows = 0;
  for (const auto* u : utts) {
    if (u->frames.cols != dim) throw DimensionError("make_batch: utterances disagree on feature width");
    rows += u->frames.rows;
  }
  batch.inputs = FrameMatrix(rows, dim);
  batch.targets.reserve(rows);
  batch.sequence_lengths.reserve(utts.size());
  auto out = batch.inputs.data.begin();
  for (const auto* u : utts) {
    out = std::copy(u->frames.data.begin(), u->frames.data.end(), out);
    batch.targets.insert(batch.targets.end(), u->labels.begin(), u->labels.end());
    batch.sequence_lengths.push_back(u->frames.rows);
  }
  return batch;
}

Batch make_batch(std::span<const Utterance> utts) {
  std::vector<const Utterance*> ptrs;
  ptrs.reserve(utts.size());
  for (const auto& u : utts) ptrs.push_back(&u);
  return make_batch(std::span<const Utterance* const>(ptrs));
}

namespace {

constexpr std::string_view kCorpusMagic = "blocksync-corpus";

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::size_t to_count(std::string_view tok, const char* what) {
  const auto v = parse_uint(tok);
  if (!v) throw IoError(std::string("corpus: malformed ") + what);
  return static_cast<std::size_t>(*v);
}

}  // namespace

void write_corpus(std::ostream& out, const Corpus& corpus) {
  out << kCorpusMagic << " 1\n"
      << "dim " << corpus.feature_dim << " classes " << corpus.num_classes << " utterances "
      << corpus.utterances.size() << '\n';
  for (const auto& u : corpus.utterances) {
    out << "utt " << u.id << ' ' << u.speaker << ' ' << u.frames.rows << '\n';
    for (std::size_t t = 0; t < u.frames.rows; ++t) {
      out << u.labels[t];
      for (double v : u.frames.row(t)) out << ' ' << format_double(v);
      out << '\n';
    }
  }
  if (!out) throw IoError("corpus: write failed");
}

Corpus read_corpus(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != std::string(kCorpusMagic) + " 1") {
    throw IoError("corpus: bad header");
  }
  if (!std::getline(in, line)) throw IoError("corpus: missing dimensions line");
  auto head = split_ws(line);
  if (head.size() != 6 || head[0] != "dim" || head[2] != "classes" || head[4] != "utterances") {
    throw IoError("corpus: malformed dimensions line");
  }
  Corpus corpus;
  corpus.feature_dim = to_count(head[1], "dim");
  corpus.num_classes = to_count(head[3], "classes");
  const std::size_t n = to_count(head[5], "utterance count");
  corpus.utterances.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw IoError("corpus: truncated");
    auto tok = split_ws(line);
    if (tok.size() != 4 || tok[0] != "utt") throw IoError("corpus: malformed utterance header");
    Utterance u;
    u.id = to_count(tok[1], "id");
    u.speaker = to_count(tok[2], "speaker");
    const std::size_t frames = to_count(tok[3], "frame count");
    u.frames = FrameMatrix(frames, corpus.feature_dim);
    u.labels.resize(frames);
    for (std::size_t t = 0; t < frames; ++t) {
      if (!std::getline(in, line)) throw IoError("corpus: truncated frames");
      auto vals = split_ws(line);
      if (vals.size() != corpus.feature_dim + 1) throw IoError("corpus: wrong number of values in frame");
      u.labels[t] = to_count(vals[0], "label");
      if (u.labels[t] >= corpus.num_classes) throw IoError("corpus: label out of range");
      for (std::size_t d = 0; d < corpus.feature_dim; ++d) {
        const auto v = parse_double(vals[d + 1]);
        if (!v) throw IoError("corpus: malformed feature value");
        u.frames(t, d) = *v;
      }
    }
    corpus.utterances.push_back(std::move(u));
  }
  return corpus;
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_corpus(out, corpus);
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_corpus(in);
}

}  // namespace blocksync
