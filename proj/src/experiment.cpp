#include "blocksync/experiment.hpp"

#include <fstream>
#include <istream>
#include <optional>
#include <sstream>

#include "blocksync/errors.hpp"
#include "blocksync/text.hpp"

namespace blocksync {

namespace {

// Stream tags under the master seed.
enum : std::uint64_t { kCorpusStream = 1, kSplitStream, kShardStream, kInitStream, kClusterStream };

std::vector<Utterance> stack_all(const std::vector<Utterance>& utts, std::size_t k) {
  std::vector<Utterance> out;
  out.reserve(utts.size());
  for (const auto& u : utts) {
    auto s = stack_utterance(u, k);
    if (s.frames.rows > 0) out.push_back(std::move(s));
  }
  return out;
}

// 1-based block index inside an epoch after which checkpoint q (1-based) is taken.
std::size_t checkpoint_block(std::size_t q, std::size_t per_epoch, std::size_t blocks) {
  return (q * blocks + per_epoch - 1) / per_epoch;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  validate(config);
  const Rng root(config.seed);
  const ModelSpec spec = model_spec(config);

  Rng corpus_rng = root.fork(kCorpusStream);
  const Corpus corpus = generate_corpus(config.corpus, corpus_rng);
  Rng split_rng = root.fork(kSplitStream);
  const CorpusSplit split = split_by_speaker(corpus, config.split, split_rng);

  const auto train = stack_all(split.train, config.stack);
  const auto val = stack_all(split.val, config.stack);
  const auto test = stack_all(split.test, config.stack);
  if (train.empty()) throw ConfigError("split_train", "training split is empty");

  Rng shard_rng = root.fork(kShardStream);
  auto shards = shard_dataset(train, config.workers, shard_rng);
  Rng init_rng = root.fork(kInitStream);
  const ParamVector initial = init_params(spec, init_rng);

  ClusterConfig cluster_config;
  cluster_config.num_workers = config.workers;
  cluster_config.block_size = config.block_size;
  cluster_config.transport = config.transport;
  cluster_config.seed = root.fork(kClusterStream).seed();
  cluster_config.utterances_per_batch = config.batch_utterances;
  cluster_config.reset_momentum_on_broadcast = config.reset_momentum;
  cluster_config.mode = options.mode;
  Cluster cluster(cluster_config, spec, LocalSgdConfig{config.learning_rate, config.momentum}, std::move(shards),
                  initial);

  SyncState sync(initial, config.block_momentum, config.block_lr);
  std::optional<ShadowState> shadow;
  if (options.shadows) shadow.emplace(initial, config.ema_rate);

  ExperimentResult result;
  result.steps_per_epoch = cluster.steps_per_epoch();
  result.blocks_per_epoch = (result.steps_per_epoch + config.block_size - 1) / config.block_size;
  const std::size_t per_epoch = config.checkpoints_per_epoch;

  std::vector<Checkpoint> checkpoints;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::size_t next_q = 1;
    for (std::size_t b = 1; b <= result.blocks_per_epoch; ++b) {
      const std::size_t done = (b - 1) * config.block_size;
      const std::size_t steps = std::min(config.block_size, result.steps_per_epoch - done);
      cluster.run_block(sync, shadow ? &*shadow : nullptr, steps);
      if (options.on_sync) options.on_sync(sync);
      while (next_q <= per_epoch && checkpoint_block(next_q, per_epoch, result.blocks_per_epoch) == b) {
        const double tag = static_cast<double>(epoch) + static_cast<double>(next_q) / static_cast<double>(per_epoch);
        checkpoints.push_back({Strategy::kBmuf, sync.block_index, tag, sync.global_model});
        if (shadow) {
          checkpoints.push_back({Strategy::kMa, sync.block_index, tag, shadow->ma_model});
          checkpoints.push_back({Strategy::kEma, sync.block_index, tag, shadow->ema_model});
        }
        ++next_q;
      }
    }
  }

  const Batch val_batch = make_batch(val);
  const Batch test_batch = make_batch(test);
  if (!val.empty()) result.val_curves = evaluate_checkpoints(checkpoints, val_batch, spec);
  if (!test.empty()) {
    result.test_curves = evaluate_checkpoints(checkpoints, test_batch, spec);
    if (shadow) {
      const FinalModels finals = final_models(*shadow, sync);
      for (Strategy s : kAllStrategies) result.finals.push_back({s, evaluate_fer(spec, finals.get(s), test_batch)});
    } else {
      result.finals.push_back({Strategy::kBmuf, evaluate_fer(spec, sync.global_model, test_batch)});
    }
  }
  return result;
}

std::string curves_csv(std::span<const EvalRecord> records) {
  std::string out = "strategy,epoch,fer\n";
  for (const auto& r : records) {
    out += to_string(r.strategy);
    out += ',';
    out += format_double(r.epoch);
    out += ',';
    out += format_double(r.fer);
    out += '\n';
  }
  return out;
}

std::string final_csv(std::span<const FinalResult> finals) {
  std::string out = "strategy,test_fer\n";
  for (const auto& f : finals) {
    out += to_string(f.strategy);
    out += ',';
    out += format_double(f.test_fer);
    out += '\n';
  }
  return out;
}

std::vector<FinalResult> parse_final_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "strategy,test_fer") throw IoError("final.csv: bad header");
  std::vector<FinalResult> out;
  while (std::getline(in, line)) {
    const std::string_view row = trim(line);
    if (row.empty()) continue;
    const auto comma = row.find(',');
    if (comma == std::string_view::npos) throw IoError("final.csv: malformed row '" + line + "'");
    const auto fer = parse_double(row.substr(comma + 1));
    if (!fer) throw IoError("final.csv: malformed value in '" + line + "'");
    try {
      out.push_back({parse_strategy(row.substr(0, comma)), *fer});
    } catch (const ArgumentError& e) {
      throw IoError(std::string("final.csv: ") + e.what());
    }
  }
  return out;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

void write_artifacts(const std::filesystem::path& dir, const ExperimentConfig& config,
                     const ExperimentResult& result) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  write_file(dir / "curves.csv", curves_csv(result.val_curves));
  write_file(dir / "test_curves.csv", curves_csv(result.test_curves));
  write_file(dir / "final.csv", final_csv(result.finals));
  write_file(dir / "manifest.cfg",
             "# Resolved configuration of this run; `blocksync run --config manifest.cfg` reproduces it.\n" +
                 serialize_config(config));
}

std::string compare_runs(std::span<const std::filesystem::path> run_dirs) {
  if (run_dirs.empty()) throw ArgumentError("compare: no run directories given");
  std::ostringstream out;
  for (const auto& dir : run_dirs) {
    const auto path = dir / "final.csv";
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    const auto finals = parse_final_csv(in);

    std::optional<double> baseline;
    for (const auto& f : finals) {
      if (f.strategy == Strategy::kBmuf) baseline = f.test_fer;
    }
    out << "run " << dir.string() << '\n';
    out << "strategy  test_fer  rel_reduction_vs_bmuf\n";
    for (Strategy s : kAllStrategies) {
      for (const auto& f : finals) {
        if (f.strategy != s) continue;
        std::string name(to_string(s));
        name.resize(10, ' ');
        std::string fer = format_fixed(100.0 * f.test_fer, 2) + "%";
        fer.resize(10, ' ');
        std::string reduction = "n/a";
        if (baseline && *baseline > 0.0) {
          reduction = format_fixed(100.0 * (*baseline - f.test_fer) / *baseline, 2) + "%";
        } else if (baseline && f.test_fer == *baseline) {
          reduction = format_fixed(0.0, 2) + "%";
        }
        out << name << fer << reduction << '\n';
      }
    }
  }
  return out.str();
}

}  // namespace blocksync
