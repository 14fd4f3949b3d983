#include "tt/perf.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include "json.hpp"

#include "tt/autograd.hpp"
#include "tt/counters.hpp"
#include "tt/ops.hpp"

namespace tt {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t elapsed_ns(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(b - a).count();
}

RegionStats run_region(const std::string& label, const std::function<void()>& fn) {
  RegionStats r;
  r.label = label;
  const MemoryStats before = memory_stats();
  reset_peak_memory();
  const std::uint64_t macs = op_counters().macs;
  const auto t0 = Clock::now();
  if (fn) fn();
  const auto t1 = Clock::now();
  r.wall_ns = elapsed_ns(t0, t1);
  r.macs = op_counters().macs - macs;
  r.alloc_bytes = memory_stats().allocated_bytes - before.allocated_bytes;
  r.peak_bytes = memory_stats().peak_bytes - before.live_bytes;
  return r;
}

nlohmann::json region_json(const RegionStats& r) {
  return {{"label", r.label},         {"wall_ns", r.wall_ns}, {"alloc_bytes", r.alloc_bytes},
          {"peak_bytes", r.peak_bytes}, {"macs", r.macs},     {"fraction", r.fraction}};
}

double round_half_even(double v) { return std::nearbyint(v); }

}  // namespace

std::string ProfileReport::to_json() const {
  nlohmann::json j;
  j["regions"] = nlohmann::json::array();
  for (const auto& r : regions) j["regions"].push_back(region_json(r));
  j["total"] = region_json(total);
  j["overhead_ns"] = overhead_ns;
  return j.dump(2);
}

ProfileReport profile(const std::vector<Region>& regions) {
  ProfileReport report;
  std::int64_t overhead = std::numeric_limits<std::int64_t>::max();
  for (int i = 0; i < 16; ++i) overhead = std::min(overhead, run_region("", {}).wall_ns);
  report.overhead_ns = overhead;

  report.total.label = "total";
  for (const auto& [label, fn] : regions) {
    RegionStats r = run_region(label, fn);
    report.total.wall_ns += r.wall_ns;
    report.total.alloc_bytes += r.alloc_bytes;
    report.total.peak_bytes = std::max(report.total.peak_bytes, r.peak_bytes);
    report.total.macs += r.macs;
    report.regions.push_back(std::move(r));
  }
  const double total = static_cast<double>(report.total.wall_ns);
  for (auto& r : report.regions) {
    r.fraction = total > 0 ? static_cast<double>(r.wall_ns) / total
                           : 1.0 / static_cast<double>(report.regions.size());
  }
  report.total.fraction = 1.0;
  return report;
}

std::int64_t timer_resolution_ns() {
  static const std::int64_t resolution = [] {
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    for (int i = 0; i < 200; ++i) {
      const auto t0 = Clock::now();
      auto t1 = Clock::now();
      while (t1 == t0) t1 = Clock::now();
      best = std::min(best, elapsed_ns(t0, t1));
    }
    return best;
  }();
  return resolution;
}

double amdahl_speedup(double f, double s) {
  if (!(f >= 0.0 && f <= 1.0) || !(s >= 1.0)) {
    fail(ErrorCode::DomainError, "amdahl_speedup needs 0 <= f <= 1 and s >= 1, got f=" +
                                     std::to_string(f) + " s=" + std::to_string(s));
  }
  return 1.0 / ((1.0 - f) + f / s);
}

Calibration observe_range(const Tensor& t) {
  require_float(t, "observe_range");
  auto p = t.data();
  if (p.empty()) return {};
  const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
  return {*lo, *hi};
}

QuantizedTensor quantize(const Tensor& t, const Calibration& c) {
  require_float(t, "quantize");
  if (!(c.min <= c.max)) {
    fail(ErrorCode::InvalidRange, "calibration min " + std::to_string(c.min) + " > max " + std::to_string(c.max));
  }
  QuantizedTensor q;
  q.shape = t.shape();
  constexpr double kScaleFloor = 1e-8;
  if (c.min == c.max) {
    q.scale = static_cast<float>(std::max<double>(std::fabs(c.min), kScaleFloor));
    q.zero_point = 0;
  } else {
    const double lo = std::min(0.0f, c.min), hi = std::max(0.0f, c.max);
    q.scale = static_cast<float>(std::max((hi - lo) / 255.0, kScaleFloor));
    const double zp = round_half_even(-128.0 - lo / q.scale);
    q.zero_point = static_cast<std::int32_t>(std::clamp(zp, -128.0, 127.0));
  }
  std::vector<std::int8_t> values(t.numel());
  auto p = t.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double v = round_half_even(static_cast<double>(p[i]) / q.scale) + q.zero_point;
    values[i] = static_cast<std::int8_t>(std::clamp(v, -128.0, 127.0));
  }
  q.data = Tensor::from_int8(std::move(values), t.shape());
  return q;
}

QuantizedTensor quantize(const Tensor& t) { return quantize(t, observe_range(t)); }

Tensor dequantize(const QuantizedTensor& q) {
  Tensor out = Tensor::empty(q.shape);
  auto src = q.data.int8_data();
  auto dst = out.data_mut();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = q.scale * static_cast<float>(static_cast<std::int32_t>(src[i]) - q.zero_point);
  }
  return out;
}

QuantizedLinear quantize_linear(const LinearLayer& layer) {
  return {quantize(layer.weight.detach()), quantize(layer.bias.detach())};
}

Tensor quantized_linear_eval(const QuantizedLinear& layer, const Tensor& x) {
  return linear(x, dequantize(layer.weight), dequantize(layer.bias));
}

PruneResult magnitude_prune(const Tensor& t, double sparsity) {
  require_float(t, "magnitude_prune");
  if (!(sparsity >= 0.0 && sparsity <= 1.0)) {
    fail(ErrorCode::DomainError, "sparsity must lie in [0, 1], got " + std::to_string(sparsity));
  }
  auto p = t.data();
  const std::size_t n = p.size();
  const auto drop = static_cast<std::size_t>(std::floor(sparsity * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::fabs(p[a]) < std::fabs(p[b]); });
  PruneResult r{Tensor::ones(t.shape()), t.detach().clone(), 0.0};
  auto m = r.mask.data_mut();
  auto w = r.pruned.data_mut();
  for (std::size_t i = 0; i < drop; ++i) {
    m[order[i]] = 0.0f;
    w[order[i]] = 0.0f;
  }
  r.achieved_sparsity = n ? static_cast<double>(drop) / static_cast<double>(n) : 0.0;
  return r;
}

Tensor distillation_loss(const Tensor& student, const Tensor& teacher, double temperature,
                         double alpha, const Tensor& hard_targets) {
  if (!(temperature > 0.0) || !(alpha >= 0.0 && alpha <= 1.0)) {
    fail(ErrorCode::DomainError, "distillation needs tau > 0 and alpha in [0, 1]");
  }
  if (student.shape() != teacher.shape() || student.rank() == 0) {
    fail(ErrorCode::ShapeMismatch, "student " + shape_str(student.shape()) + " vs teacher " +
                                       shape_str(teacher.shape()));
  }
  const std::size_t axis = student.rank() - 1;
  const std::size_t rows = student.numel() / student.shape().back();
  const float inv_tau = static_cast<float>(1.0 / temperature);

  Tensor p_teacher, log_p_teacher;
  {
    NoGradGuard no_grad;
    p_teacher = softmax(mul_scalar(teacher.detach(), inv_tau), axis);
    log_p_teacher = log_softmax(mul_scalar(teacher.detach(), inv_tau), axis);
  }
  // sum p (log p - log q): exactly zero when the two distributions agree.
  Tensor gap = log_p_teacher - log_softmax(mul_scalar(student, inv_tau), axis);
  Tensor kl = mul_scalar(sum(p_teacher * gap), 1.0f / static_cast<float>(rows));
  Tensor soft = mul_scalar(kl, static_cast<float>((1.0 - alpha) * temperature * temperature));
  if (alpha == 0.0) return soft;
  Tensor hard = mul_scalar(cross_entropy_loss(student, hard_targets), static_cast<float>(alpha));
  if (alpha == 1.0) return hard;
  return hard + soft;
}

std::string BenchmarkResult::to_json() const {
  nlohmann::json j{{"samples_ns", samples_ns},
                   {"mean_ns", mean_ns},
                   {"std_ns", std_ns},
                   {"ci", {{"level", ci.level}, {"lo_ns", ci.lo_ns}, {"hi_ns", ci.hi_ns}}},
                   {"warmup", warmup},
                   {"repeats", repeats},
                   {"seed", seed}};
  return j.dump(2);
}

BenchmarkResult summarize(std::vector<double> samples, double level, std::size_t warmup,
                          std::uint64_t seed) {
  if (samples.size() < 2) fail(ErrorCode::DomainError, "a confidence interval needs at least 2 samples");
  if (!(level > 0.0 && level < 1.0)) {
    fail(ErrorCode::DomainError, "confidence level must lie in (0, 1), got " + std::to_string(level));
  }
  BenchmarkResult r;
  const double n = static_cast<double>(samples.size());
  r.mean_ns = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double s : samples) ss += (s - r.mean_ns) * (s - r.mean_ns);
  r.std_ns = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  const double t = boost::math::quantile(boost::math::complement(dist, (1.0 - level) / 2.0));
  const double half = t * r.std_ns / std::sqrt(n);
  r.ci = {level, r.mean_ns - half, r.mean_ns + half};
  r.samples_ns = std::move(samples);
  r.warmup = warmup;
  r.repeats = r.samples_ns.size();
  r.seed = seed;
  return r;
}

BenchmarkResult benchmark(const std::function<void(std::uint64_t)>& f, std::size_t warmup,
                          std::size_t repeats, double level, std::uint64_t seed) {
  if (repeats < 2) fail(ErrorCode::DomainError, "benchmark needs repeat_count >= 2");
  if (!(level > 0.0 && level < 1.0)) {
    fail(ErrorCode::DomainError, "confidence level must lie in (0, 1), got " + std::to_string(level));
  }
  for (std::size_t i = 0; i < warmup; ++i) f(seed);
  std::vector<double> samples;
  samples.reserve(repeats);
  for (std::size_t i = 0; i < repeats; ++i) {
    const auto t0 = Clock::now();
    f(seed);
    const auto t1 = Clock::now();
    samples.push_back(static_cast<double>(elapsed_ns(t0, t1)));
  }
  return summarize(std::move(samples), level, warmup, seed);
}

BenchmarkResult benchmark(const std::function<void()>& f, std::size_t warmup, std::size_t repeats,
                          double level, std::uint64_t seed) {
  return benchmark([&f](std::uint64_t) { f(); }, warmup, repeats, level, seed);
}

Comparison compare(const BenchmarkResult& a, const BenchmarkResult& b) {
  if (a.ci.level != b.ci.level) {
    fail(ErrorCode::LevelMismatch, "confidence levels " + std::to_string(a.ci.level) + " and " +
                                       std::to_string(b.ci.level));
  }
  Comparison c;
  c.speedup = a.mean_ns / b.mean_ns;
  const double na = static_cast<double>(a.samples_ns.size());
  const double nb = static_cast<double>(b.samples_ns.size());
  const double va = a.std_ns * a.std_ns / na, vb = b.std_ns * b.std_ns / nb;
  const double diff = a.mean_ns - b.mean_ns;
  if (va + vb == 0.0) {
    // Zero variance on both sides: any difference at all is certain.
    c.significant = diff != 0.0;
    c.t_statistic = diff == 0.0 ? 0.0 : std::copysign(INFINITY, diff);
    c.p_value = diff == 0.0 ? 1.0 : 0.0;
    c.degrees_of_freedom = na + nb - 2.0;
    return c;
  }
  c.t_statistic = diff / std::sqrt(va + vb);
  c.degrees_of_freedom =
      (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  const boost::math::students_t dist(c.degrees_of_freedom);
  c.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(c.t_statistic)));
  c.significant = c.p_value < 1.0 - a.ci.level;
  return c;
}

}  // namespace tt
