#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "blocksync/models.hpp"
#include "blocksync/rng.hpp"

namespace blocksync {

struct Utterance {
  std::size_t id = 0;
  std::size_t speaker = 0;
  FrameMatrix frames;  // [T x dim]
  std::vector<std::size_t> labels;
};

struct Corpus {
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;
  std::vector<Utterance> utterances;
};

/// Knobs of the synthetic sequence-classification task. Every frame is
///   x = class_mean[label] + speaker_offset[speaker] + noise
/// with class means ~ N(0, class_separation^2), offsets ~ N(0, speaker_spread^2)
/// and noise ~ N(0, noise^2) per dimension. Labels form a Markov chain that
/// redraws a uniform class with probability label_change_prob per frame.
struct CorpusParams {
  std::size_t num_speakers = 80;
  std::size_t utterances_per_speaker = 10;
  std::size_t frames_per_utterance = 60;
  std::size_t base_dim = 12;
  std::size_t num_classes = 8;
  double label_change_prob = 0.15;
  double class_separation = 1.0;
  double speaker_spread = 0.5;
  double noise = 1.0;
};

Corpus generate_corpus(const CorpusParams& params, Rng& rng);

struct SplitSpec {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct CorpusSplit {
  std::vector<Utterance> train;
  std::vector<Utterance> val;
  std::vector<Utterance> test;
};

/// Speaker counts per split are round-half-up(fraction * speakers) for train
/// and val, the rest go to test. Speakers are shuffled with `rng` first; no
/// speaker ever appears in two splits. Throws ArgumentError with fewer than 3
/// speakers or fractions that are negative or do not sum to 1.
CorpusSplit split_by_speaker(const Corpus& corpus, const SplitSpec& spec, Rng& rng);

struct StackedFrames {
  FrameMatrix frames;  // [floor(T/k) x k*dim]
  std::vector<std::size_t> labels;
};

/// Concatenates non-overlapping groups of k frames. Trailing frames that do
/// not fill a group are dropped; each super-frame takes the label of the last
/// frame in its group.
StackedFrames stack_frames(const FrameMatrix& frames, std::span<const std::size_t> labels, std::size_t k);

Utterance stack_utterance(const Utterance& utt, std::size_t k);

/// Shuffles with `rng`, then deals utterances round-robin to n shards.
std::vector<std::vector<Utterance>> shard_dataset(std::span<const Utterance> split, std::size_t n, Rng& rng);

/// Concatenates utterances into one batch, one sequence per utterance.
Batch make_batch(std::span<const Utterance> utts);
Batch make_batch(std::span<const Utterance* const> utts);

/// Text container, version 1:
///
///   blocksync-corpus 1
///   dim <d> classes <c> utterances <n>
///   then per utterance:
///   utt <id> <speaker> <frames>
///   <frames lines: label followed by d feature values>
void write_corpus(std::ostream& out, const Corpus& corpus);
Corpus read_corpus(std::istream& in);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);
Corpus load_corpus(const std::filesystem::path& path);

}  // namespace blocksync
