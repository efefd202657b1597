#include "blocksync/comm.hpp"

#include <algorithm>
#include <exception>
#include <numeric>
#include <string>
#include <thread>
#include <variant>

#include "blocksync/channel.hpp"
#include "blocksync/errors.hpp"

namespace blocksync {

std::string_view to_string(Transport t) noexcept {
  return t == Transport::kCentralized ? "centralized" : "decentralized";
}

Transport parse_transport(std::string_view s) {
  if (s == "centralized") return Transport::kCentralized;
  if (s == "decentralized") return Transport::kDecentralized;
  throw ArgumentError("unknown transport '" + std::string(s) + "'");
}

ShardPlan make_shard_plan(std::size_t length, std::size_t n) {
  if (n == 0) throw ArgumentError("make_shard_plan: need at least one worker");
  ShardPlan plan(n);
  const std::size_t base = length / n;
  const std::size_t extra = length % n;
  std::size_t begin = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t size = base + (j < extra ? 1 : 0);
    plan[j] = {begin, begin + size};
    begin += size;
  }
  return plan;
}

namespace detail {

struct SliceMessage {
  std::size_t from = 0;
  std::vector<double> values;
};

// Per-worker mailboxes for the two phases of the sharded average. The phases
// use separate inboxes so a fast peer's all-gather traffic is never mistaken
// for a reduce-scatter slice.
class ShardExchange {
 public:
  explicit ShardExchange(ShardPlan plan)
      : plan_(std::move(plan)), scatter_inbox_(plan_.size()), gather_inbox_(plan_.size()) {}

  // Reduce-scatter, send side: slice j of `model` goes to worker j.
  void scatter(std::size_t rank, const ParamVector& model) {
    for (std::size_t j = 0; j < plan_.size(); ++j) {
      const auto r = plan_[j];
      scatter_inbox_[j].send({rank, std::vector<double>(model.begin() + static_cast<std::ptrdiff_t>(r.begin),
                                                        model.begin() + static_cast<std::ptrdiff_t>(r.end))});
    }
  }

  // Reduce-scatter, receive side: average the N slices this rank owns.
  std::vector<double> reduce(std::size_t rank) {
    const std::size_t n = plan_.size();
    std::vector<std::vector<double>> slices(n);
    for (std::size_t k = 0; k < n; ++k) {
      auto msg = scatter_inbox_[rank].receive();
      slices[msg.from] = std::move(msg.values);
    }
    // Arrival order is up to the scheduler; the reduction order is not.
    std::vector<std::span<const double>> views(slices.begin(), slices.end());
    std::vector<double> avg(plan_[rank].size());
    mean_reduce_into(views, avg);
    return avg;
  }

  void gather_send(std::size_t rank, const std::vector<double>& avg) {
    for (std::size_t j = 0; j < plan_.size(); ++j) gather_inbox_[j].send({rank, avg});
  }

  ParamVector gather_collect(std::size_t rank) {
    ParamVector full(plan_.back().end);
    for (std::size_t k = 0; k < plan_.size(); ++k) {
      auto msg = gather_inbox_[rank].receive();
      std::copy(msg.values.begin(), msg.values.end(),
                full.begin() + static_cast<std::ptrdiff_t>(plan_[msg.from].begin));
    }
    return full;
  }

  // Runs one rank's full share of the protocol; blocks on its peers.
  ParamVector run_rank(std::size_t rank, const ParamVector& model) {
    scatter(rank, model);
    gather_send(rank, reduce(rank));
    return gather_collect(rank);
  }

  // All ranks, phase by phase, on the calling thread.
  std::vector<ParamVector> run_serial(std::span<const ParamVector* const> models) {
    const std::size_t n = plan_.size();
    std::vector<std::vector<double>> avgs(n);
    std::vector<ParamVector> out(n);
    for (std::size_t r = 0; r < n; ++r) scatter(r, *models[r]);
    for (std::size_t r = 0; r < n; ++r) avgs[r] = reduce(r);
    for (std::size_t r = 0; r < n; ++r) gather_send(r, avgs[r]);
    for (std::size_t r = 0; r < n; ++r) out[r] = gather_collect(r);
    return out;
  }

 private:
  ShardPlan plan_;
  std::vector<Channel<SliceMessage>> scatter_inbox_;
  std::vector<Channel<SliceMessage>> gather_inbox_;
};

}  // namespace detail

namespace {

void check_plan(const ShardPlan& plan, std::size_t length) {
  std::size_t expected = 0;
  for (const auto& r : plan) {
    if (r.begin != expected || r.end < r.begin) throw DimensionError("shard plan is not contiguous");
    expected = r.end;
  }
  if (expected != length) throw DimensionError("shard plan does not cover the parameter vector");
}

ParamVector agreed_result(std::vector<ParamVector>& results) {
  for (std::size_t r = 1; r < results.size(); ++r) {
    if (!results[r].bitwise_equal(results[0])) throw StateError("sharded aggregation: peers disagree");
  }
  return std::move(results[0]);
}

}  // namespace

ParamVector decentralized_aggregate(std::span<const ParamVector> local_models, const ShardPlan& plan,
                                    ExecutionMode mode) {
  if (local_models.empty()) throw ArgumentError("decentralized_aggregate: no local models");
  const std::size_t length = local_models.front().size();
  for (const auto& m : local_models) require_same_length(m.size(), length, "decentralized_aggregate");
  require_same_length(plan.size(), local_models.size(), "decentralized_aggregate shard plan");
  check_plan(plan, length);

  const std::size_t n = local_models.size();
  detail::ShardExchange exchange(plan);
  std::vector<ParamVector> results(n);
  if (mode == ExecutionMode::kSingleThread) {
    std::vector<const ParamVector*> ptrs;
    for (const auto& m : local_models) ptrs.push_back(&m);
    results = exchange.run_serial(ptrs);
  } else {
    std::vector<std::jthread> peers;
    peers.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
      peers.emplace_back([&, r] { results[r] = exchange.run_rank(r, local_models[r]); });
    }
  }
  return agreed_result(results);
}

// ---------------------------------------------------------------------------
// Cluster

struct Cluster::Worker {
  std::size_t rank = 0;
  ParamVector model;
  SgdState optimizer;
  std::vector<Utterance> shard;
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  Rng rng{0};

  // Next mini-batch from this worker's stream; reshuffles at every pass.
  Batch next_batch(std::size_t utterances) {
    std::vector<const Utterance*> picked;
    picked.reserve(utterances);
    for (std::size_t k = 0; k < utterances; ++k) {
      if (cursor == order.size()) {
        rng.shuffle(order.begin(), order.end());
        cursor = 0;
      }
      picked.push_back(&shard[order[cursor++]]);
    }
    return make_batch(std::span<const Utterance* const>(picked));
  }

  void train(const ModelSpec& spec, std::size_t steps, std::size_t utterances_per_batch) {
    if (shard.empty()) return;
    for (std::size_t s = 0; s < steps; ++s) {
      const Batch batch = next_batch(utterances_per_batch);
      const auto lg = backward(spec, model, batch);
      sgd_step(model, lg.gradient, optimizer);
    }
  }

  void receive_global(const ParamVector& global, bool reset_momentum) {
    model = global;
    if (reset_momentum) std::fill(optimizer.velocity.begin(), optimizer.velocity.end(), 0.0);
  }
};

namespace {

struct TrainCommand {
  std::size_t steps;
};
struct BroadcastCommand {
  std::shared_ptr<const ParamVector> global;
};
struct StopCommand {};
using Command = std::variant<TrainCommand, BroadcastCommand, StopCommand>;

// Worker -> coordinator. For Train: the local model (centralized) or the
// reassembled average (decentralized). For Broadcast: an empty ack.
struct Report {
  std::size_t from = 0;
  ParamVector model;
  std::exception_ptr error;
};

}  // namespace

struct Cluster::Threads {
  std::vector<Channel<Command>> commands;
  Channel<Report> reports;
  std::vector<std::jthread> workers;

  explicit Threads(std::size_t n) : commands(n) {}

  std::vector<Report> collect(std::size_t n) {
    std::vector<Report> out(n);
    for (std::size_t k = 0; k < n; ++k) {
      Report r = reports.receive();
      out[r.from] = std::move(r);
    }
    for (const auto& r : out) {
      if (r.error) std::rethrow_exception(r.error);
    }
    return out;
  }
};

Cluster::Cluster(const ClusterConfig& config, ModelSpec model, const LocalSgdConfig& sgd,
                 std::vector<std::vector<Utterance>> shards, const ParamVector& initial_model)
    : config_(config), model_(std::move(model)) {
  if (config_.num_workers == 0) throw ArgumentError("cluster needs at least one worker");
  if (config_.block_size == 0) throw ArgumentError("block_size must be at least 1");
  if (config_.utterances_per_batch == 0) throw ArgumentError("utterances_per_batch must be at least 1");
  require_same_length(shards.size(), config_.num_workers, "cluster shards");
  require_same_length(initial_model.size(), param_count(model_), "cluster initial model");

  plan_ = make_shard_plan(initial_model.size(), config_.num_workers);
  exchange_ = std::make_unique<detail::ShardExchange>(plan_);
  const Rng root(config_.seed);
  for (std::size_t r = 0; r < config_.num_workers; ++r) {
    auto w = std::make_unique<Worker>();
    w->rank = r;
    w->model = initial_model;
    w->optimizer = SgdState(initial_model.size(), sgd.learning_rate, sgd.momentum);
    w->shard = std::move(shards[r]);
    w->order.resize(w->shard.size());
    std::iota(w->order.begin(), w->order.end(), std::size_t{0});
    w->rng = root.fork(1000 + r);
    w->cursor = w->order.size();  // forces a shuffle before the first batch
    workers_.push_back(std::move(w));
  }

  if (config_.mode == ExecutionMode::kThreaded) {
    threads_ = std::make_unique<Threads>(config_.num_workers);
    for (std::size_t r = 0; r < config_.num_workers; ++r) {
      threads_->workers.emplace_back([this, r] {
        Worker& w = *workers_[r];
        auto& inbox = threads_->commands[r];
        for (;;) {
          Command cmd = inbox.receive();
          if (std::holds_alternative<StopCommand>(cmd)) return;
          Report report{r, {}, nullptr};
          if (const auto* train = std::get_if<TrainCommand>(&cmd)) {
            try {
              w.train(model_, train->steps, config_.utterances_per_batch);
            } catch (...) {
              report.error = std::current_exception();
            }
            // Peers block on this rank's slices, so it takes part in the
            // exchange even after a failure.
            if (config_.transport == Transport::kDecentralized) {
              report.model = exchange_->run_rank(r, w.model);
            } else {
              report.model = w.model;
            }
          } else {
            const auto& bc = std::get<BroadcastCommand>(cmd);
            w.receive_global(*bc.global, config_.reset_momentum_on_broadcast);
          }
          threads_->reports.send(std::move(report));
        }
      });
    }
  }
}

Cluster::~Cluster() {
  if (threads_) {
    for (auto& c : threads_->commands) c.send(StopCommand{});
    threads_->workers.clear();  // joins
  }
}

std::size_t Cluster::steps_per_epoch() const {
  std::size_t largest = 0;
  for (const auto& w : workers_) largest = std::max(largest, w->shard.size());
  const std::size_t per = config_.utterances_per_batch;
  return std::max<std::size_t>(1, (largest + per - 1) / per);
}

const ParamVector& Cluster::worker_model(std::size_t rank) const { return workers_.at(rank)->model; }

const SgdState& Cluster::worker_optimizer(std::size_t rank) const { return workers_.at(rank)->optimizer; }

ParamVector Cluster::aggregate_single_thread(std::size_t steps) {
  for (auto& w : workers_) w->train(model_, steps, config_.utterances_per_batch);
  std::vector<const ParamVector*> models;
  for (const auto& w : workers_) models.push_back(&w->model);
  if (config_.transport == Transport::kDecentralized) {
    auto results = exchange_->run_serial(models);
    return agreed_result(results);
  }
  std::vector<std::span<const double>> views;
  for (const auto* m : models) views.push_back(m->view());
  ParamVector avg(models.front()->size());
  mean_reduce_into(views, avg.view());
  return avg;
}

void Cluster::run_block(SyncState& sync, ShadowState* shadow, std::size_t steps) {
  require_same_length(sync.global_model.size(), plan_.back().end, "run_block sync state");
  const std::size_t n = config_.num_workers;

  ParamVector averaged;
  if (!threads_) {
    averaged = aggregate_single_thread(steps);
  } else {
    for (auto& c : threads_->commands) c.send(TrainCommand{steps});
    auto reports = threads_->collect(n);
    if (config_.transport == Transport::kDecentralized) {
      std::vector<ParamVector> results;
      for (auto& r : reports) results.push_back(std::move(r.model));
      averaged = agreed_result(results);
    } else {
      std::vector<ParamVector> locals;
      for (auto& r : reports) locals.push_back(std::move(r.model));
      averaged = mean_reduce(locals);
    }
  }

  sync = bmuf_apply(sync, averaged);
  if (shadow != nullptr) *shadow = shadow_update(*shadow, sync.global_model);

  if (!threads_) {
    for (auto& w : workers_) w->receive_global(sync.global_model, config_.reset_momentum_on_broadcast);
    return;
  }
  auto global = std::make_shared<const ParamVector>(sync.global_model);
  for (auto& c : threads_->commands) c.send(BroadcastCommand{global});
  threads_->collect(n);  // barrier: every worker holds global(t)
}

}  // namespace blocksync
