#pragma once

#include <cstdint>
#include <random>

namespace blocksync {

/// Deterministic random stream.
///
/// Engine: std::mt19937_64, whose output sequence is fully specified by the
/// C++ standard. The standard distributions are not (libstdc++ and libc++
/// disagree), so the conversions below are implemented here:
///   uniform()   53 high bits of one draw, scaled to [0, 1)
///   normal()    Box-Muller on two uniform() draws, no cached spare
///   below(n)    rejection sampling on the raw 64-bit output
/// Child streams are seeded with splitmix64(seed ^ splitmix64(tag)), so
/// `Rng(s).fork(t)` is a pure function of (s, t). The integer stream is
/// identical on every platform; normal() additionally goes through libm
/// log/cos/sqrt.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

  /// Independent stream derived from this stream's seed and `tag`; does not
  /// advance this stream.
  Rng fork(std::uint64_t tag) const;

  template <typename It>
  void shuffle(It first, It last) {
    // Fisher-Yates, back to front.
    auto n = static_cast<std::uint64_t>(last - first);
    for (; n > 1; --n) {
      const auto k = below(n);
      std::swap(first[n - 1], first[k]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace blocksync
