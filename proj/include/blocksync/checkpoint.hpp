#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "blocksync/param_vector.hpp"
#include "blocksync/sync.hpp"

namespace blocksync {

/// A model snapshot taken at a synchronization boundary.
struct Checkpoint {
  Strategy strategy = Strategy::kBmuf;
  std::uint64_t block_index = 0;
  double epoch = 0.0;  // fractional, e.g. 1.25 is a quarter into the second epoch
  ParamVector params;
};

/// Text format, version 1:
///
///   blocksync-checkpoint 1
///   strategy <bmuf|ma|ema>
///   block <u64>
///   epoch <real>
///   length <n>
///   <n lines, one parameter each, shortest round-trip decimal>
///
/// Reading restores every value bit for bit.
void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace blocksync
