#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "blocksync/comm.hpp"
#include "blocksync/data.hpp"
#include "blocksync/metrics.hpp"
#include "blocksync/models.hpp"
#include "blocksync/sync.hpp"

namespace blocksync {

enum class ModelKind { kMlp, kLstm };

/// Everything needed to reproduce one training run bit for bit.
struct ExperimentConfig {
  ModelKind model = ModelKind::kMlp;
  std::vector<std::size_t> mlp_hidden = {64};
  std::size_t lstm_hidden = 24;
  std::size_t lstm_layers = 2;

  std::size_t workers = 8;
  std::size_t block_size = 16;
  Transport transport = Transport::kDecentralized;
  std::size_t batch_utterances = 1;
  bool reset_momentum = false;

  double block_momentum = 0.9;
  double block_lr = 1.0;
  double ema_rate = 0.5;  // calibrated for the default synthetic task

  double learning_rate = 0.1;
  double momentum = 0.9;

  CorpusParams corpus;
  std::size_t stack = 3;
  SplitSpec split;

  std::size_t epochs = 4;
  std::size_t checkpoints_per_epoch = 4;
  std::uint64_t seed = 1;
  std::string output_dir;
};

/// Checks every invariant; throws ConfigError naming the first bad key.
void validate(const ExperimentConfig& config);

/// Flat `key = value` format. Blank lines and `#` comments are ignored; keys
/// may appear in any order and at most once; missing keys keep their default.
/// Throws ConfigError naming the offending key.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every key, fixed order, reals in shortest round-trip form. Parsing the
/// output gives back an identical config.
std::string serialize_config(const ExperimentConfig& config);

ModelSpec model_spec(const ExperimentConfig& config);

struct RunOptions {
  ExecutionMode mode = ExecutionMode::kThreaded;
  /// When false no MA/EMA shadow is maintained and only bmuf checkpoints are taken.
  bool shadows = true;
  /// Called after every synchronization with the new sync state.
  std::function<void(const SyncState&)> on_sync;
};

struct FinalResult {
  Strategy strategy = Strategy::kBmuf;
  double test_fer = 0.0;
};

struct ExperimentResult {
  std::vector<EvalRecord> val_curves;   // one row per (checkpoint, strategy)
  std::vector<EvalRecord> test_curves;  // same checkpoints on the test split
  std::vector<FinalResult> finals;      // end-of-training models on the test split
  std::size_t steps_per_epoch = 0;
  std::size_t blocks_per_epoch = 0;
};

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// `strategy,epoch,fer` with one row per record.
std::string curves_csv(std::span<const EvalRecord> records);
/// `strategy,test_fer`.
std::string final_csv(std::span<const FinalResult> finals);
std::vector<FinalResult> parse_final_csv(std::istream& in);

/// Writes curves.csv, test_curves.csv, final.csv and manifest.cfg into `dir`.
void write_artifacts(const std::filesystem::path& dir, const ExperimentConfig& config,
                     const ExperimentResult& result);

/// Per-run table of final test FER and relative reduction against bmuf, as
/// percentages with two decimals, rows in bmuf, ma, ema order.
std::string compare_runs(std::span<const std::filesystem::path> run_dirs);

}  // namespace blocksync
