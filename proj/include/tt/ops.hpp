#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "tt/autograd.hpp"
#include "tt/tensor.hpp"

namespace tt {

enum class BinaryOp { Add, Sub, Mul, Div };

/// Broadcasting elementwise arithmetic in IEEE single precision. Division
/// by zero produces inf/NaN, never an error.
Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a);

Tensor add_scalar(const Tensor& a, float s);
Tensor mul_scalar(const Tensor& a, float s);
inline Tensor operator*(const Tensor& a, float s) { return mul_scalar(a, s); }
inline Tensor operator*(float s, const Tensor& a) { return mul_scalar(a, s); }
inline Tensor operator+(const Tensor& a, float s) { return add_scalar(a, s); }

/// (m,k)@(k,n); (..., m, k)@(k,n) with the left batch folded into rows; or
/// (B..., m, k)@(B..., k, n) with identical batch dimensions.
Tensor matmul(const Tensor& a, const Tensor& b);

enum class ReduceOp { Sum, Mean, Max };

// Axis omitted: rank-0 result. Axis given: that dimension is removed.
Tensor reduce(ReduceOp op, const Tensor& t, std::optional<std::size_t> axis = std::nullopt);
inline Tensor sum(const Tensor& t) { return reduce(ReduceOp::Sum, t); }
inline Tensor sum(const Tensor& t, std::size_t axis) { return reduce(ReduceOp::Sum, t, axis); }
inline Tensor mean(const Tensor& t) { return reduce(ReduceOp::Mean, t); }
inline Tensor mean(const Tensor& t, std::size_t axis) { return reduce(ReduceOp::Mean, t, axis); }
inline Tensor max(const Tensor& t) { return reduce(ReduceOp::Max, t); }
inline Tensor max(const Tensor& t, std::size_t axis) { return reduce(ReduceOp::Max, t, axis); }

Tensor reshape(const Tensor& t, const Shape& shape);
Tensor permute(const Tensor& t, const std::vector<std::size_t>& perm);
// Swaps the last two axes.
Tensor transpose(const Tensor& t);

Tensor exp(const Tensor& t);
Tensor log(const Tensor& t);

// Non-differentiable helpers.
Tensor argmax(const Tensor& t, std::size_t axis);
// Sums a broadcast gradient back down to `shape`.
Tensor sum_to(const Tensor& g, const Shape& shape);
// Broadcast copy of t to `shape`.
Tensor expand(const Tensor& t, const Shape& shape);
std::vector<std::size_t> inverse_permutation(const std::vector<std::size_t>& perm);

}  // namespace tt
