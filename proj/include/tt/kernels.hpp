#pragma once

#include <cstddef>
#include <span>

namespace tt::kernels {

// Row-major C[M,N] (+)= A[M,K] * B[K,N]. OpenMP-parallel over rows of C
// with a register-blocked inner loop; each output element is owned by one
// thread so results are independent of the thread count.
void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
          bool accumulate = false);

// out[cols, rows] = in[rows, cols]^T
void transpose2d(std::size_t rows, std::size_t cols, const float* in, float* out);

// Serial textbook loops, kept as the oracle for the parallel kernels.
namespace reference {

void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
          bool accumulate = false);

}  // namespace reference

}  // namespace tt::kernels
