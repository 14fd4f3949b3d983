#pragma once

#if defined(_OPENMP)
#include <omp.h>
#define TT_PRAGMA_HELPER(x) _Pragma(#x)
#define TT_OMP(x) TT_PRAGMA_HELPER(omp x)
#else
#define TT_OMP(x)
#endif

namespace tt {

// Thread count used by the parallel kernels (1 when built without OpenMP).
int max_threads();
void set_num_threads(int n);

// Work (in multiply-adds or elements) below which kernels stay serial.
inline constexpr long kParallelGrain = 1 << 15;

}  // namespace tt
