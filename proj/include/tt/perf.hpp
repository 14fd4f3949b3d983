#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tt/nn.hpp"
#include "tt/tensor.hpp"

namespace tt {

// ---- profiling -------------------------------------------------------------

struct RegionStats {
  std::string label;
  std::int64_t wall_ns = 0;
  std::int64_t alloc_bytes = 0;  // bytes allocated inside the region
  std::int64_t peak_bytes = 0;   // peak live bytes above the region's starting level
  std::uint64_t macs = 0;
  double fraction = 0.0;         // of the summed region time
};

struct ProfileReport {
  std::vector<RegionStats> regions;
  RegionStats total;
  // Wall time of an empty region (minimum over several tries): the
  // profiler's own cost per region.
  std::int64_t overhead_ns = 0;
  std::string to_json() const;
};

using Region = std::pair<std::string, std::function<void()>>;

// Runs each region once, in order, on the calling thread.
ProfileReport profile(const std::vector<Region>& regions);

// Smallest observable non-zero step of the monotonic clock, measured once.
std::int64_t timer_resolution_ns();

// ---- Amdahl ----------------------------------------------------------------

/// 1 / ((1 - f) + f / s); DomainError unless 0 <= f <= 1 and s >= 1.
double amdahl_speedup(double fraction_optimized, double local_speedup);

// ---- quantization ----------------------------------------------------------

struct QuantizedTensor {
  Tensor data;  // Int8
  float scale = 1.0f;
  std::int32_t zero_point = 0;
  Shape shape;

  // One byte per element plus scale and zero point.
  std::size_t footprint() const { return data.numel() + 8; }
};

struct Calibration {
  float min = 0.0f;
  float max = 0.0f;
};

Calibration observe_range(const Tensor& t);

/// Per-tensor asymmetric affine quantization. The calibration range is
/// first widened to contain 0, then scale = max((max - min) / 255, 1e-8),
/// zero_point = round(-128 - min / scale) and q = clamp(round(x / scale) +
/// zero_point, -128, 127), rounding half to even throughout. A constant
/// range c quantizes with zero_point 0 and scale |c| (floored), which
/// reproduces c exactly. InvalidRange when min > max.
QuantizedTensor quantize(const Tensor& t, const Calibration& calibration);
QuantizedTensor quantize(const Tensor& t);
Tensor dequantize(const QuantizedTensor& q);

// Both tensors quantized; activations stay Float32.
struct QuantizedLinear {
  QuantizedTensor weight;
  QuantizedTensor bias;
  std::size_t footprint() const { return weight.footprint() + bias.footprint(); }
};

QuantizedLinear quantize_linear(const LinearLayer& layer);
// Weight-only: dequantizes, then the Float32 linear path.
Tensor quantized_linear_eval(const QuantizedLinear& layer, const Tensor& x);

// ---- pruning and distillation ---------------------------------------------

struct PruneResult {
  Tensor mask;    // Float32 0/1, same shape
  Tensor pruned;
  double achieved_sparsity = 0.0;
};

/// Zeroes floor(sparsity * count) smallest-|w| elements, lower index first
/// among equal magnitudes. DomainError outside [0, 1].
PruneResult magnitude_prune(const Tensor& t, double sparsity);

/// alpha * CE(student, hard) + (1 - alpha) * tau^2 * KL(softmax(teacher/tau)
/// || softmax(student/tau)), averaged over rows. The teacher is a constant.
Tensor distillation_loss(const Tensor& student_logits, const Tensor& teacher_logits,
                         double temperature, double alpha, const Tensor& hard_targets);

// ---- benchmarking ----------------------------------------------------------

struct ConfidenceInterval {
  double level = 0.95;
  double lo_ns = 0.0;
  double hi_ns = 0.0;
};

struct BenchmarkResult {
  std::vector<double> samples_ns;
  double mean_ns = 0.0;
  double std_ns = 0.0;  // sample standard deviation (n - 1)
  ConfidenceInterval ci;
  std::size_t warmup = 0;
  std::size_t repeats = 0;
  std::uint64_t seed = 0;
  std::string to_json() const;
};

/// Student-t interval mean +- t(level, n-1) * std / sqrt(n) over samples.
BenchmarkResult summarize(std::vector<double> samples_ns, double level, std::size_t warmup,
                          std::uint64_t seed);

/// warmup discarded runs, then `repeats` timed runs of f(seed).
/// DomainError when repeats < 2 or level is not in (0, 1).
BenchmarkResult benchmark(const std::function<void(std::uint64_t seed)>& f, std::size_t warmup,
                          std::size_t repeats, double level, std::uint64_t seed);
BenchmarkResult benchmark(const std::function<void()>& f, std::size_t warmup, std::size_t repeats,
                          double level, std::uint64_t seed);

struct Comparison {
  double speedup = 1.0;  // mean(a) / mean(b)
  bool significant = false;
  double t_statistic = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 1.0;
};

/// Welch's two-sided t-test at the shared confidence level; LevelMismatch
/// if the two results disagree on it.
Comparison compare(const BenchmarkResult& a, const BenchmarkResult& b);

}  // namespace tt
