#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "blocksync/data.hpp"
#include "blocksync/models.hpp"
#include "blocksync/optim.hpp"
#include "blocksync/param_vector.hpp"
#include "blocksync/sync.hpp"

namespace blocksync {

namespace detail {
class ShardExchange;
}

enum class Transport { kCentralized, kDecentralized };

std::string_view to_string(Transport t) noexcept;
Transport parse_transport(std::string_view s);

enum class ExecutionMode { kThreaded, kSingleThread };

/// Half-open range [begin, end) of parameter indices.
struct ShardRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const ShardRange&, const ShardRange&) = default;
};

/// Range j is the slice worker j owns during aggregation.
using ShardPlan = std::vector<ShardRange>;

/// Contiguous ranges covering [0, length); the first length % n ranges are one
/// element longer. Ranges may be empty when n > length.
ShardPlan make_shard_plan(std::size_t length, std::size_t n);

/// Peer-to-peer averaging without a central server.
///
/// Reduce-scatter: worker i sends slice j of its model to worker j, which
/// averages the N slices it receives in ascending sender order. All-gather:
/// worker j sends its averaged slice to every worker, which reassembles the
/// full average. Result is bitwise equal to mean_reduce(local_models).
ParamVector decentralized_aggregate(std::span<const ParamVector> local_models, const ShardPlan& plan,
                                    ExecutionMode mode = ExecutionMode::kThreaded);

struct ClusterConfig {
  std::size_t num_workers = 8;
  std::size_t block_size = 16;  // local mini-batches per worker per block
  Transport transport = Transport::kDecentralized;
  std::uint64_t seed = 1;
  std::size_t utterances_per_batch = 1;
  bool reset_momentum_on_broadcast = false;
  ExecutionMode mode = ExecutionMode::kThreaded;
};

struct LocalSgdConfig {
  double learning_rate = 0.1;
  double momentum = 0.9;
};

/// N simulated workers training data-parallel between synchronizations.
///
/// In threaded mode each worker is a long-lived thread driven by commands on a
/// channel; model slices and reports also travel over channels. Single-thread
/// mode runs the same per-worker code in rank order and produces bitwise the
/// same trajectory.
class Cluster {
 public:
  /// `shards[j]` is worker j's training data (already frame-stacked). Every
  /// worker starts from `initial_model`.
  Cluster(const ClusterConfig& config, ModelSpec model, const LocalSgdConfig& sgd,
          std::vector<std::vector<Utterance>> shards, const ParamVector& initial_model);
  ~Cluster();

  Cluster(const Cluster&) = delete;
  Cluster& operator=(const Cluster&) = delete;

  /// One block: every worker runs `steps` SGD steps on its own stream, then
  /// the local models are aggregated over the configured transport, passed
  /// through bmuf_apply, observed by `shadow` (if non-null) and broadcast back,
  /// overwriting every local model. Returns after every worker holds the new
  /// global model.
  void run_block(SyncState& sync, ShadowState* shadow, std::size_t steps);
  void run_block(SyncState& sync, ShadowState* shadow) { run_block(sync, shadow, config_.block_size); }

  /// Mini-batches that cover the largest shard once.
  std::size_t steps_per_epoch() const;

  std::size_t num_workers() const noexcept { return config_.num_workers; }
  const ClusterConfig& config() const noexcept { return config_; }

  /// Only meaningful between blocks.
  const ParamVector& worker_model(std::size_t rank) const;
  const SgdState& worker_optimizer(std::size_t rank) const;

 private:
  struct Worker;
  struct Threads;

  ParamVector aggregate_single_thread(std::size_t steps);

  ClusterConfig config_;
  ModelSpec model_;
  ShardPlan plan_;
  std::vector<std::unique_ptr<Worker>> workers_;
  std::unique_ptr<detail::ShardExchange> exchange_;
  std::unique_ptr<Threads> threads_;
};

}  // namespace blocksync
