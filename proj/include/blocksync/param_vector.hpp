#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace blocksync {

/// Flat vector of every trainable parameter of one model. Its length is fixed
/// at construction; arithmetic never resizes it.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t length, double fill = 0.0) : values_(length, fill) {}
  explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}
  ParamVector(std::initializer_list<double> values) : values_(values) {}

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }

  std::span<const double> view() const noexcept { return values_; }
  std::span<double> view() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }
  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }

  bool all_finite() const noexcept;

  /// Bitwise equality: two NaNs with the same payload compare equal, +0 and -0 do not.
  bool bitwise_equal(const ParamVector& other) const noexcept;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

/// a*x + y, element-wise.
ParamVector axpy(double a, const ParamVector& x, const ParamVector& y);

/// x - y, element-wise.
ParamVector subtract(const ParamVector& x, const ParamVector& y);

/// Element-wise mean of `vs`, accumulated in ascending list order.
///
/// The accumulation is a running mean (m += (v_j - m) / (j + 1)) rather than
/// sum-then-divide, so N copies of the same vector reduce to that vector
/// exactly and the result never leaves the per-component [min, max] hull.
ParamVector mean_reduce(std::span<const ParamVector> vs);

/// Core kernel shared by every averaging path in the library: writes the mean
/// of `inputs[j][offset + i]` over j into `out[i]`. The centralized and the
/// sharded aggregation both call this, which is what makes them agree bitwise.
void mean_reduce_into(std::span<const std::span<const double>> inputs, std::span<double> out);

void require_same_length(std::size_t a, std::size_t b, const char* what);

}  // namespace blocksync
