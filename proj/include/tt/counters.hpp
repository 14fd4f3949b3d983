#pragma once

#include <cstdint>

namespace tt {

// Per-thread operation counters maintained by the instrumented ops. Only
// forward computations are counted; backward kernels do not increment.
struct OpCounters {
  std::uint64_t macs = 0;
  // Bytes of (N, N) attention score matrices materialized, summed over heads.
  std::uint64_t attention_score_bytes = 0;
  // Key/value positions projected during attention (one per position per step).
  std::uint64_t kv_computations = 0;
};

OpCounters& op_counters();
void reset_op_counters();

}  // namespace tt
