#include "blocksync/param_vector.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "blocksync/errors.hpp"

namespace blocksync {

bool ParamVector::all_finite() const noexcept {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool ParamVector::bitwise_equal(const ParamVector& other) const noexcept {
  return values_.size() == other.values_.size() &&
         (values_.empty() ||
          std::memcmp(values_.data(), other.values_.data(), values_.size() * sizeof(double)) == 0);
}

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                         std::to_string(b) + ")");
  }
}

ParamVector axpy(double a, const ParamVector& x, const ParamVector& y) {
  require_same_length(x.size(), y.size(), "axpy");
  if (!std::isfinite(a)) throw NumericError("axpy: non-finite scale");
  ParamVector out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = a * x[i] + y[i];
  return out;
}

ParamVector subtract(const ParamVector& x, const ParamVector& y) {
  require_same_length(x.size(), y.size(), "subtract");
  ParamVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return out;
}

void mean_reduce_into(std::span<const std::span<const double>> inputs, std::span<double> out) {
  if (inputs.empty()) throw ArgumentError("mean_reduce: empty input list");
  for (const auto& in : inputs) require_same_length(in.size(), out.size(), "mean_reduce");
  const auto& first = inputs.front();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = first[i];
  for (std::size_t j = 1; j < inputs.size(); ++j) {
    const double count = static_cast<double>(j + 1);
    const auto& in = inputs[j];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += (in[i] - out[i]) / count;
  }
}

ParamVector mean_reduce(std::span<const ParamVector> vs) {
  if (vs.empty()) throw ArgumentError("mean_reduce: empty input list");
  std::vector<std::span<const double>> views;
  views.reserve(vs.size());
  for (const auto& v : vs) views.push_back(v.view());
  ParamVector out(vs.front().size());
  mean_reduce_into(views, out.view());
  return out;
}

}  // namespace blocksync
