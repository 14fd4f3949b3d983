#pragma once

// Shared helpers for the unit tests: seeded random tensors and
// double-precision reference computations used as oracles.

#include <cmath>
#include <span>
#include <vector>

#include "doctest.h"

#include "tt/autograd.hpp"
#include "tt/ops.hpp"
#include "tt/rng.hpp"
#include "tt/tensor.hpp"

namespace tt::testing {

inline Tensor random_tensor(const Shape& shape, SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<float> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return Tensor::from(std::move(v), shape);
}

inline Tensor random_param(const Shape& shape, SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = random_tensor(shape, rng, lo, hi);
  t.set_requires_grad(true);
  return t;
}

inline Shape random_shape(SplitMix64& rng, std::size_t max_rank, std::size_t max_extent) {
  Shape s(1 + rng.below(max_rank));
  for (auto& d : s) d = 1 + rng.below(max_extent);
  return s;
}

inline double max_abs_diff(std::span<const float> a, std::span<const float> b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(double(a[i]) - double(b[i])));
  return m;
}

// Fixed random weights turn any tensor-valued f into a scalar objective
// whose gradient exercises every output element.
inline Tensor weighted_sum(const Tensor& y, std::uint64_t seed = 99) {
  SplitMix64 rng(seed);
  Tensor w = random_tensor(y.shape(), rng);
  return sum(y * w);
}

// Double-precision row-major matrix product.
inline std::vector<double> matmul_oracle(const std::vector<float>& a, const std::vector<float>& b,
                                         std::size_t m, std::size_t k, std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += double(a[i * k + p]) * b[p * n + j];
  return c;
}

// Turns grad mode on for a test body.
struct GradScope {
  GradModeGuard guard{true};
};

}  // namespace tt::testing
