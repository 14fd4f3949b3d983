#include "tt/kernels.hpp"

#include <algorithm>
#include <cstring>

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

#include "tt/parallel.hpp"

namespace tt {

int max_threads() {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_num_threads(int n) {
#if defined(_OPENMP)
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
}

}  // namespace tt

namespace tt::kernels {

namespace {

constexpr std::size_t kDepthBlock = 256;

#if defined(__AVX512F__)

constexpr std::size_t kRowBlock = 8;

// Rows x 32 block of C held in zmm registers; each B row is loaded once and
// reused across all Rows.
template <std::size_t Rows>
inline void panel32(std::size_t k0, std::size_t k1, std::size_t n, std::size_t k,
                    const float* __restrict a, const float* __restrict b, float* __restrict c) {
  __m512 lo[Rows], hi[Rows];
  for (std::size_t r = 0; r < Rows; ++r) {
    lo[r] = _mm512_loadu_ps(c + r * n);
    hi[r] = _mm512_loadu_ps(c + r * n + 16);
  }
  for (std::size_t p = k0; p < k1; ++p) {
    const __m512 b0 = _mm512_loadu_ps(b + p * n);
    const __m512 b1 = _mm512_loadu_ps(b + p * n + 16);
    for (std::size_t r = 0; r < Rows; ++r) {
      const __m512 av = _mm512_set1_ps(a[r * k + p]);
      lo[r] = _mm512_fmadd_ps(av, b0, lo[r]);
      hi[r] = _mm512_fmadd_ps(av, b1, hi[r]);
    }
  }
  for (std::size_t r = 0; r < Rows; ++r) {
    _mm512_storeu_ps(c + r * n, lo[r]);
    _mm512_storeu_ps(c + r * n + 16, hi[r]);
  }
}

// Up to 16 columns, masked so ragged widths need no scalar tail.
template <std::size_t Rows>
inline void panel16(std::size_t k0, std::size_t k1, std::size_t n, std::size_t k,
                    const float* __restrict a, const float* __restrict b, float* __restrict c,
                    __mmask16 mask) {
  __m512 acc[Rows];
  for (std::size_t r = 0; r < Rows; ++r) acc[r] = _mm512_maskz_loadu_ps(mask, c + r * n);
  for (std::size_t p = k0; p < k1; ++p) {
    const __m512 bv = _mm512_maskz_loadu_ps(mask, b + p * n);
    for (std::size_t r = 0; r < Rows; ++r) {
      acc[r] = _mm512_fmadd_ps(_mm512_set1_ps(a[r * k + p]), bv, acc[r]);
    }
  }
  for (std::size_t r = 0; r < Rows; ++r) _mm512_mask_storeu_ps(c + r * n, mask, acc[r]);
}

template <std::size_t Rows>
inline void row_block(std::size_t k0, std::size_t k1, std::size_t n, std::size_t k, const float* a,
                      const float* b, float* c) {
  std::size_t j = 0;
  for (; j + 32 <= n; j += 32) panel32<Rows>(k0, k1, n, k, a, b + j, c + j);
  for (; j < n; j += 16) {
    const std::size_t w = std::min<std::size_t>(16, n - j);
    const auto mask = static_cast<__mmask16>((1u << w) - 1u);
    panel16<Rows>(k0, k1, n, k, a, b + j, c + j, mask);
  }
}

#else

constexpr std::size_t kRowBlock = 4;

template <std::size_t Rows, std::size_t Width>
inline void micro_kernel(std::size_t k0, std::size_t k1, std::size_t n, std::size_t k,
                         const float* __restrict a, const float* __restrict b,
                         float* __restrict c) {
  float acc[Rows][Width];
  for (std::size_t r = 0; r < Rows; ++r) {
    for (std::size_t j = 0; j < Width; ++j) acc[r][j] = c[r * n + j];
  }
  for (std::size_t p = k0; p < k1; ++p) {
    const float* __restrict b_row = b + p * n;
    for (std::size_t r = 0; r < Rows; ++r) {
      const float av = a[r * k + p];
      for (std::size_t j = 0; j < Width; ++j) acc[r][j] += av * b_row[j];
    }
  }
  for (std::size_t r = 0; r < Rows; ++r) {
    for (std::size_t j = 0; j < Width; ++j) c[r * n + j] = acc[r][j];
  }
}

template <std::size_t Rows>
inline void row_block(std::size_t k0, std::size_t k1, std::size_t n, std::size_t k, const float* a,
                      const float* b, float* c) {
  std::size_t j = 0;
  for (; j + 16 <= n; j += 16) micro_kernel<Rows, 16>(k0, k1, n, k, a, b + j, c + j);
  for (std::size_t r = 0; r < Rows; ++r) {
    for (std::size_t p = k0; p < k1; ++p) {
      const float av = a[r * k + p];
      for (std::size_t jj = j; jj < n; ++jj) c[r * n + jj] += av * b[p * n + jj];
    }
  }
}

#endif

template <std::size_t Rows>
void dispatch_rows(std::size_t rows, std::size_t k0, std::size_t k1, std::size_t n, std::size_t k,
                   const float* a, const float* b, float* c) {
  if constexpr (Rows > 1) {
    if (rows < Rows) return dispatch_rows<Rows - 1>(rows, k0, k1, n, k, a, b, c);
  }
  row_block<Rows>(k0, k1, n, k, a, b, c);
}

}  // namespace

void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
          bool accumulate) {
  if (!accumulate) std::memset(c, 0, m * n * sizeof(float));
  if (m == 0 || n == 0 || k == 0) return;
  const long blocks = static_cast<long>((m + kRowBlock - 1) / kRowBlock);
  const bool parallel = static_cast<long>(m * n * k) >= kParallelGrain;
  for (std::size_t k0 = 0; k0 < k; k0 += kDepthBlock) {
    const std::size_t k1 = std::min(k, k0 + kDepthBlock);
    TT_OMP(parallel for schedule(static) if (parallel))
    for (long blk = 0; blk < blocks; ++blk) {
      const std::size_t i = static_cast<std::size_t>(blk) * kRowBlock;
      dispatch_rows<kRowBlock>(std::min(kRowBlock, m - i), k0, k1, n, k, a + i * k, b, c + i * n);
    }
  }
}

void transpose2d(std::size_t rows, std::size_t cols, const float* in, float* out) {
  constexpr std::size_t kTile = 32;
  for (std::size_t i0 = 0; i0 < rows; i0 += kTile) {
    for (std::size_t j0 = 0; j0 < cols; j0 += kTile) {
      const std::size_t i1 = std::min(rows, i0 + kTile);
      const std::size_t j1 = std::min(cols, j0 + kTile);
      for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = j0; j < j1; ++j) out[j * rows + i] = in[i * cols + j];
      }
    }
  }
}

namespace reference {

void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
          bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      float sum = accumulate ? c[i * n + j] : 0.0f;
      for (std::size_t p = 0; p < k; ++p) sum += a[i * k + p] * b[p * n + j];
      c[i * n + j] = sum;
    }
  }
}

}  // namespace reference

}  // namespace tt::kernels
