// Acceptance run: one PASS/FAIL line per criterion, then a second full run
// with the same seed for the determinism criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tt/autograd.hpp"
#include "tt/gpt.hpp"
#include "tt/harness.hpp"
#include "tt/models.hpp"
#include "tt/nn.hpp"
#include "tt/ops.hpp"
#include "tt/optim.hpp"
#include "tt/perf.hpp"
#include "tt/spatial.hpp"

using namespace tt;

namespace {

constexpr std::uint64_t kSeed = 42;

struct Outcome {
  bool pass = true;
  std::string summary;
  // Non-timing values compared by the determinism criterion.
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::string> failures;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      failures.push_back(what);
    }
  }
  void metric(const std::string& name, double v) { metrics.emplace_back(name, v); }
};

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

Tensor uniform(const Shape& s, SplitMix64& rng, double lo = -1, double hi = 1) {
  std::vector<float> v(shape_numel(s));
  for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return Tensor::from(std::move(v), s);
}

// Distinct values at least `gap` apart in random order, so neither max nor
// pooling meets a tie under a perturbation smaller than gap / 2.
Tensor spaced(const Shape& s, SplitMix64& rng, float gap) {
  const std::size_t n = shape_numel(s);
  std::vector<float> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = (static_cast<float>(i) - n / 2.0f) * gap;
  for (std::size_t i = n; i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
  return Tensor::from(std::move(v), s);
}

Tensor weighted(const Tensor& y, std::uint64_t seed) {
  SplitMix64 rng(seed);
  return sum(y * uniform(y.shape(), rng));
}

Tensor param(Tensor t) {
  t.set_requires_grad(true);
  return t;
}

// ---- 1 ---------------------------------------------------------------------
Outcome memory_arithmetic() {
  Outcome o;
  const auto bytes = memory_footprint(Shape{32, 3, 224, 224}, DType::Float32);
  o.require(bytes == 19267584, "footprint == 19,267,584");
  o.metric("bytes", double(bytes));
  o.summary = "footprint (32,3,224,224) f32 = " + std::to_string(bytes) + " bytes";
  return o;
}

// ---- 2 ---------------------------------------------------------------------
Outcome conv_efficiency() {
  Outcome o;
  const auto conv = conv_accounting(3, 32, 3, 3, {1, 3, 32, 32}).param_count;
  SplitMix64 rng(kSeed);
  const auto dense = LinearLayer(3072, 32, rng).parameter_count();
  const double ratio = double(dense) / double(conv);
  o.require(conv == 896, "conv params == 896");
  o.require(dense == 98336, "dense params == 98,336");
  o.require(ratio >= 109 && ratio <= 110, "ratio in [109, 110]");
  o.metric("conv", double(conv));
  o.metric("dense", double(dense));
  o.metric("ratio", ratio);
  o.summary = "conv " + std::to_string(conv) + ", dense " + std::to_string(dense) + ", ratio " + fmt(ratio);
  return o;
}

// ---- 3 ---------------------------------------------------------------------
Outcome mac_count() {
  Outcome o;
  const auto big = conv_accounting(3, 32, 5, 5, {128, 3, 32, 32}).macs;
  o.require(big == 240844800, "macs == 240,844,800");
  SplitMix64 rng(kSeed);
  Conv2dLayer layer(3, 32, 5, rng);
  std::uint64_t executed = 0;
  conv2d_naive(uniform({2, 3, 8, 8}, rng), layer, &executed);
  const auto analytic = conv_accounting(layer, {2, 3, 8, 8}).macs;
  o.require(executed == analytic, "instrumented count == analytic count");
  o.metric("macs", double(big));
  o.metric("scaled_executed", double(executed));
  o.summary = std::to_string(big) + " MACs; (2,3,8,8): executed " + std::to_string(executed) +
              " vs analytic " + std::to_string(analytic);
  return o;
}

// ---- 4 ---------------------------------------------------------------------
Outcome optimizer_memory() {
  Outcome o;
  GradModeGuard on(true);
  std::vector<Tensor> params = {param(Tensor::zeros({100, 99})), param(Tensor::zeros({100}))};
  std::size_t count = 0;
  for (auto& p : params) {
    p.accumulate_grad(Tensor::ones(p.shape()));
    count += p.numel();
  }
  o.require(count == 10000, "10,000 parameters");
  const std::pair<OptimizerKind, double> kinds[] = {
      {OptimizerKind::SGD, 1}, {OptimizerKind::Momentum, 2}, {OptimizerKind::Adam, 3}};
  std::string s;
  for (auto [kind, expect] : kinds) {
    const auto b = optimizer_state_bytes(optimizer_new(kind, params), params);
    const double ratio = double(b.optimizer_related_total) / double(b.param_bytes);
    o.require(ratio == expect, std::string(optimizer_name(kind)) + " ratio");
    o.metric(std::string(optimizer_name(kind)), ratio);
    s += std::string(s.empty() ? "" : ", ") + std::string(optimizer_name(kind)) + " " + fmt(ratio);
  }
  o.summary = "related/param bytes: " + s;
  return o;
}

// ---- 5 ---------------------------------------------------------------------
Outcome autograd_anchor() {
  Outcome o;
  GradModeGuard on(true);
  {
    Tensor x = Tensor::from({3.0f}, {1}, true);
    backward(x * x);
    o.require(x.grad()->item() == 6.0f, "x.grad == 6");
    o.metric("anchor", x.grad()->item());
  }
  using F = std::function<Tensor(const Tensor&)>;
  struct Op {
    const char* name;
    std::function<std::pair<F, Tensor>(SplitMix64&, std::uint64_t)> make;
  };
  // Each maker draws a fresh random input and any fixed operands.
  std::vector<Op> ops = {
      {"add", [](SplitMix64& r, std::uint64_t s) {
         Tensor b = uniform({1, 4}, r);
         return std::pair<F, Tensor>{[=](const Tensor& t) { return weighted(t + b, s); }, uniform({3, 4}, r)};
       }},
      {"sub", [](SplitMix64& r, std::uint64_t s) {
         Tensor b = uniform({3, 1}, r);
         return std::pair<F, Tensor>{[=](const Tensor& t) { return weighted(b - t, s); }, uniform({3, 4}, r)};
       }},
      {"mul", [](SplitMix64& r, std::uint64_t s) {
         Tensor b = uniform({3, 4}, r);
         return std::pair<F, Tensor>{[=](const Tensor& t) { return weighted(t * b, s); }, uniform({3, 4}, r)};
       }},
      {"div", [](SplitMix64& r, std::uint64_t s) {
         Tensor b = uniform({4}, r, 0.5, 2);
         return std::pair<F, Tensor>{[=](const Tensor& t) { return weighted(b / add_scalar(t, 3.0f), s); }, uniform({3, 4}, r)};
       }},
      {"matmul", [](SplitMix64& r, std::uint64_t s) {
         Tensor b = uniform({4, 3}, r);
         return std::pair<F, Tensor>{[=](const Tensor& t) { return weighted(matmul(t, b), s); }, uniform({2, 3, 4}, r)};
       }},
      {"sum_axis", [](SplitMix64& r, std::uint64_t s) {
         return std::pair<F, Tensor>{[=](const Tensor& t) { return weighted(sum(t, 1), s); }, uniform({3, 4}, r)};
       }},
      {"mean_axis", [](SplitMix64& r, std::uint64_t s) {
         return std::pair<F, Tensor>{[=](const Tensor& t) { return weighted(mean(t, 0), s); }, uniform({3, 4}, r)};
       }},
      {"max_axis", [](SplitMix64& r, std::uint64_t s) {
         return std::pair<F, Tensor>{[=](const Tensor& t) { return weighted(max(t, 1), s); }, spaced({3, 4}, r, 0.1f)};
       }},
      {"permute", [](SplitMix64& r, std::uint64_t s) {
         return std::pair<F, Tensor>{[=](const Tensor& t) { return weighted(permute(reshape(t, {2, 3, 2}), {2, 0, 1}), s); },
                                     uniform({3, 4}, r)};
       }},
      {"exp_log", [](SplitMix64& r, std::uint64_t s) {
         return std::pair<F, Tensor>{[=](const Tensor& t) { return weighted(log(add_scalar(exp(t), 1.0f)), s); }, uniform({3, 4}, r)};
       }},
      {"relu", [](SplitMix64& r, std::uint64_t s) {
         Tensor x = uniform({3, 4}, r);
         for (auto& v : x.data_mut()) v += v >= 0 ? 0.1f : -0.1f;
         return std::pair<F, Tensor>{[=](const Tensor& t) { return weighted(relu(t), s); }, x};
       }},
      {"sigmoid", [](SplitMix64& r, std::uint64_t s) {
         return std::pair<F, Tensor>{[=](const Tensor& t) { return weighted(sigmoid(t), s); }, uniform({3, 4}, r, -3, 3)};
       }},
      {"tanh", [](SplitMix64& r, std::uint64_t s) {
         return std::pair<F, Tensor>{[=](const Tensor& t) { return weighted(tanh(t), s); }, uniform({3, 4}, r, -2, 2)};
       }},
      {"gelu", [](SplitMix64& r, std::uint64_t s) {
         return std::pair<F, Tensor>{[=](const Tensor& t) { return weighted(gelu(t), s); }, uniform({3, 4}, r, -2, 2)};
       }},
      {"softmax", [](SplitMix64& r, std::uint64_t s) {
         return std::pair<F, Tensor>{[=](const Tensor& t) { return weighted(softmax(t, 1), s); }, uniform({3, 4}, r, -2, 2)};
       }},
      {"linear", [](SplitMix64& r, std::uint64_t s) {
         Tensor w = uniform({2, 4}, r), b = uniform({2}, r);
         return std::pair<F, Tensor>{[=](const Tensor& t) { return weighted(linear(t, w, b), s); }, uniform({3, 4}, r)};
       }},
      {"cross_entropy", [](SplitMix64& r, std::uint64_t) {
         Tensor y = Tensor::from_ids({static_cast<std::int64_t>(r.below(4)), static_cast<std::int64_t>(r.below(4)),
                                      static_cast<std::int64_t>(r.below(4))},
                                     {3});
         return std::pair<F, Tensor>{[=](const Tensor& t) { return cross_entropy_loss(t, y); }, uniform({3, 4}, r, -2, 2)};
       }},
      {"mse", [](SplitMix64& r, std::uint64_t) {
         Tensor y = uniform({3, 4}, r);
         return std::pair<F, Tensor>{[=](const Tensor& t) { return mse_loss(t, y); }, uniform({3, 4}, r)};
       }},
      {"conv2d", [](SplitMix64& r, std::uint64_t s) {
         Tensor w = uniform({2, 2, 3, 3}, r, -0.5, 0.5), b = uniform({2}, r);
         const std::size_t stride = 1 + r.below(2), pad = r.below(2);
         return std::pair<F, Tensor>{[=](const Tensor& t) { return weighted(conv2d_naive(t, Conv2dLayer(w, b, stride, pad)), s); },
                                     uniform({1, 2, 5, 5}, r)};
       }},
      {"conv2d_weight", [](SplitMix64& r, std::uint64_t s) {
         Tensor x = uniform({2, 2, 4, 4}, r), b = uniform({3}, r);
         return std::pair<F, Tensor>{[=](const Tensor& t) { return weighted(conv2d_fast(x, Conv2dLayer(t, b, 1, 1)), s); },
                                     uniform({3, 2, 3, 3}, r, -0.5, 0.5)};
       }},
      {"maxpool2d", [](SplitMix64& r, std::uint64_t s) {
         return std::pair<F, Tensor>{[=](const Tensor& t) { return weighted(maxpool2d(t, 2), s); }, spaced({1, 2, 4, 4}, r, 0.1f)};
       }},
      {"layer_norm", [](SplitMix64& r, std::uint64_t s) {
         Tensor g = uniform({5}, r, 0.5, 1.5), b = uniform({5}, r);
         return std::pair<F, Tensor>{[=](const Tensor& t) { return weighted(layer_norm(t, g, b), s); }, uniform({3, 5}, r, -2, 2)};
       }},
      {"attention", [](SplitMix64& r, std::uint64_t s) {
         Tensor k = uniform({1, 2, 4, 3}, r), v = uniform({1, 2, 4, 3}, r);
         const bool causal = r.below(2) == 1;
         return std::pair<F, Tensor>{[=](const Tensor& t) { return weighted(attention(t, k, v, causal), s); },
                                     uniform({1, 2, 4, 3}, r)};
       }},
      {"attention_kv", [](SplitMix64& r, std::uint64_t s) {
         Tensor q = uniform({1, 2, 4, 3}, r), v = uniform({1, 2, 4, 3}, r);
         return std::pair<F, Tensor>{[=](const Tensor& t) { return weighted(attention(q, t, v, true), s); },
                                     uniform({1, 2, 4, 3}, r)};
       }},
      {"embed", [](SplitMix64& r, std::uint64_t s) {
         Tensor ids = Tensor::from_ids({static_cast<std::int64_t>(r.below(5)), static_cast<std::int64_t>(r.below(5)),
                                        static_cast<std::int64_t>(r.below(5))},
                                       {3});
         return std::pair<F, Tensor>{[=](const Tensor& t) { return weighted(embed(t, ids), s); }, uniform({5, 3}, r)};
       }},
      {"distillation", [](SplitMix64& r, std::uint64_t) {
         Tensor teacher = uniform({3, 4}, r, -2, 2);
         Tensor y = Tensor::from_ids({0, 3, 1}, {3});
         const double tau = r.uniform(0.5, 3), alpha = r.uniform();
         return std::pair<F, Tensor>{[=](const Tensor& t) { return distillation_loss(t, teacher, tau, alpha, y); },
                                     uniform({3, 4}, r, -2, 2)};
       }},
  };
  SplitMix64 rng(kSeed);
  std::size_t cases = 0, passed = 0;
  double worst = 0;
  std::string worst_op;
  const std::size_t per_op = (200 + ops.size() - 1) / ops.size() + 1;
  for (const auto& op : ops) {
    for (std::size_t i = 0; i < per_op; ++i) {
      auto [f, x] = op.make(rng, rng.next());
      x.set_requires_grad(true);
      const auto rep = grad_check(f, x, 1e-2f, 1e-4);
      ++cases;
      passed += rep.pass;
      if (rep.max_rel_error > worst) {
        worst = rep.max_rel_error;
        worst_op = op.name;
      }
      if (!rep.pass) o.failures.push_back(std::string(op.name) + " rel error " + fmt(rep.max_rel_error));
    }
  }
  o.require(cases >= 200, ">= 200 property cases");
  o.require(passed == cases, "all grad checks pass at 1e-4");
  o.metric("cases", double(cases));
  o.metric("passed", double(passed));
  o.metric("worst_rel_error", worst);
  o.summary = "x.grad = 6; grad_check " + std::to_string(passed) + "/" + std::to_string(cases) + " over " +
              std::to_string(ops.size()) + " ops, worst " + fmt(worst, 3) + " (" + worst_op + ")";
  return o;
}

// ---- 6 ---------------------------------------------------------------------
Outcome conv_speedup() {
  Outcome o;
  SplitMix64 rng(kSeed);
  int shapes = 0;
  double worst = 0;
  while (shapes < 50) {
    const std::size_t B = 1 + rng.below(4), C = 1 + rng.below(8), O = 1 + rng.below(8);
    const std::size_t H = 1 + rng.below(16), W = 1 + rng.below(16), K = 1 + rng.below(5);
    const std::size_t s = 1 + rng.below(2), p = rng.below(3);
    if (H + 2 * p < K || W + 2 * p < K) continue;
    ++shapes;
    Conv2dLayer layer(uniform({O, C, K, K}, rng), uniform({O}, rng), s, p);
    Tensor x = uniform({B, C, H, W}, rng);
    Tensor a = conv2d_naive(x, layer), b = conv2d_fast(x, layer);
    for (std::size_t i = 0; i < a.numel(); ++i) {
      worst = std::max(worst, std::fabs(double(a.data()[i]) - b.data()[i]) / std::max(1.0, std::fabs(double(a.data()[i]))));
    }
  }
  o.require(worst <= 1e-4, "fast == naive within 1e-4 on 50 shapes");
  o.metric("equivalence_worst", worst);

  const auto r = run_bench_target("conv", 3, 10, 0.95, kSeed);
  // Conservative interval on the ratio of means from the two intervals.
  const double lo = r.baseline.ci.lo_ns / r.optimized.ci.hi_ns;
  const double hi = r.baseline.ci.hi_ns / r.optimized.ci.lo_ns;
  o.require(r.comparison.speedup >= 10.0, "speedup >= 10");
  o.require(lo > 1.0, "speedup interval excludes 1.0");
  o.require(r.comparison.significant, "Welch test significant");
  o.metric("bench_max_abs_diff", r.max_abs_diff);
  o.summary = "50 shapes, worst rel " + fmt(worst, 3) + "; speedup " + fmt(r.comparison.speedup, 4) +
              "x, interval [" + fmt(lo, 4) + ", " + fmt(hi, 4) + "], p=" + fmt(r.comparison.p_value, 3);
  return o;
}

// ---- 7 ---------------------------------------------------------------------
Outcome kv_cache() {
  Outcome o;
  GPTConfig cfg;
  const auto params = gpt_init(cfg, kSeed);
  const auto plain = generate(cfg, params, {5}, 100, {}, false);
  const auto cached = generate(cfg, params, {5}, 100, {}, true);
  double diff = 0;
  for (std::size_t s = 0; s < plain.step_logits.size(); ++s)
    for (std::size_t i = 0; i < plain.step_logits[s].size(); ++i)
      diff = std::max(diff, double(std::fabs(plain.step_logits[s][i] - cached.step_logits[s][i])));
  o.require(plain.total_kv() == 5050, "uncached kv == 5,050");
  o.require(cached.total_kv() == 100, "cached kv == 100");
  o.require(plain.tokens == cached.tokens, "greedy tokens identical");
  o.require(diff <= 1e-4, "logits within 1e-4");
  o.metric("uncached", double(plain.total_kv()));
  o.metric("cached", double(cached.total_kv()));
  o.metric("logit_diff", diff);
  std::int64_t h = 0;
  for (auto t : cached.tokens) h = h * 31 + t;
  o.metric("token_hash", double(h % 1000000007));
  o.summary = "kv uncached " + std::to_string(plain.total_kv()) + ", cached " + std::to_string(cached.total_kv()) +
              ", tokens " + (plain.tokens == cached.tokens ? "identical" : "differ") + ", max logit diff " + fmt(diff, 3);
  return o;
}

// ---- 8 ---------------------------------------------------------------------
Outcome amdahl() {
  Outcome o;
  const double s = amdahl_speedup(0.7, 2.0);
  o.require(s >= 1.53 && s <= 1.54, "in [1.53, 1.54]");
  o.require(std::fabs(s - 1.0 / ((1.0 - 0.7) + 0.7 / 2.0)) <= 1e-12, "matches 1/((1-f)+f/s)");
  o.metric("speedup", s);
  o.summary = "amdahl(0.7, 2) = " + fmt(s);
  return o;
}

// ---- 9 ---------------------------------------------------------------------
Outcome quantization() {
  Outcome o;
  const DigitSplit data = digit_split(kSeed);
  MLP mlp = [&] {
    GradModeGuard on(true);
    MLP m = make_digits_mlp(kSeed);
    train(m, data.train, digits_train_config(kSeed));
    return m;
  }();
  const double float_acc = evaluate_accuracy(mlp, data.test);
  MLP q = mlp;
  std::size_t qbytes = 0;
  for (auto& layer : q.layers) {
    const QuantizedLinear ql = quantize_linear(layer);
    qbytes += ql.footprint();
    layer = LinearLayer(dequantize(ql.weight), dequantize(ql.bias));
  }
  const double q_acc = evaluate_accuracy(q, data.test);
  const std::size_t fbytes = parameter_bytes(mlp.parameters());
  const double ratio = double(fbytes) / double(qbytes);
  const double drop_points = (float_acc - q_acc) * 100.0;
  o.require(ratio >= 3.9 && ratio <= 4.0, "compression in [3.9, 4.0]");
  o.require(drop_points <= 2.0, "accuracy drop <= 2 points");
  o.metric("compression", ratio);
  o.metric("float_accuracy", float_acc);
  o.metric("int8_accuracy", q_acc);
  o.summary = "compression " + fmt(ratio, 5) + "x (" + std::to_string(fbytes) + " -> " + std::to_string(qbytes) +
              " bytes), accuracy " + fmt(float_acc, 4) + " -> " + fmt(q_acc, 4);
  return o;
}

Outcome milestones(std::initializer_list<int> ids) {
  Outcome o;
  MilestoneOptions opts;
  opts.seed = kSeed;
  for (int id : ids) {
    const MilestoneResult r = run_milestone(id, opts);
    o.require(r.pass, "milestone " + std::to_string(id) + ": " + r.failed_criterion);
    o.metric("m" + std::to_string(id) + "." + r.metric, r.value);
    for (const auto& [k, v] : r.details) o.metric("m" + std::to_string(id) + "." + k, v);
    o.summary += std::string(o.summary.empty() ? "" : "; ") + "M" + std::to_string(id) + " " + r.metric + "=" +
                 fmt(r.value, 4) + (r.pass ? "" : " FAIL");
  }
  return o;
}

// ---- 10, 11 ----------------------------------------------------------------
Outcome milestones_1_3() { return milestones({1, 2, 3}); }

Outcome milestone_5() {
  Outcome o = milestones({5});
  double ratio = 1;
  for (const auto& [k, v] : o.metrics) {
    if (k == "m5.final_to_initial_loss") ratio = v;
  }
  o.require(ratio < 0.5, "final loss below half the initial loss");
  return o;
}

// ---- 12 --------------------------------------------------------------------
Outcome milestone_6() {
  Outcome o;
  MilestoneOptions opts;
  opts.seed = kSeed;
  const auto path = (std::filesystem::temp_directory_path() / "tt_acceptance_submission.json").string();
  opts.submission_path = path;
  const MilestoneResult r = run_milestone(6, opts);
  o.require(r.pass, "milestone 6: " + r.failed_criterion);
  const ValidationReport v = validate_submission(path);
  o.require(v.valid && v.violations.empty(), "zero violations");
  std::ifstream in(path);
  const auto j = nlohmann::json::parse(in);
  const auto& b = j["baseline_metrics"];
  const auto& q = j["optimized_metrics"];
  const double speedup_gap = std::fabs(j["improvement"]["speedup"].get<double>() -
                                       b["latency_ms_p50"].get<double>() / q["latency_ms_p50"].get<double>());
  const double ratio_gap = std::fabs(j["improvement"]["compression_ratio"].get<double>() -
                                     b["model_bytes"].get<double>() / q["model_bytes"].get<double>());
  o.require(speedup_gap <= 1e-6, "speedup invariant to 1e-6");
  o.require(ratio_gap <= 1e-6, "compression invariant to 1e-6");
  o.metric("violations", double(v.violations.size()));
  for (const auto& [k, val] : r.details) o.metric(k, val);
  o.metric("model_bytes_baseline", b["model_bytes"].get<double>());
  o.metric("model_bytes_optimized", q["model_bytes"].get<double>());
  o.summary = std::to_string(v.violations.size()) + " violations; speedup " +
              fmt(j["improvement"]["speedup"].get<double>(), 4) + "x (gap " + fmt(speedup_gap, 2) +
              "), compression " + fmt(j["improvement"]["compression_ratio"].get<double>(), 5) + "x (gap " +
              fmt(ratio_gap, 2) + ")";
  return o;
}

struct Run {
  bool pass;
  std::vector<std::pair<std::string, double>> metrics;
};

void print(int id, const char* name, const Outcome& o, double seconds) {
  std::printf("[%s] %2d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name, o.summary.c_str(), seconds);
  for (const auto& f : o.failures) std::printf("        failed: %s\n", f.c_str());
  std::fflush(stdout);
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "memory arithmetic", memory_arithmetic},
      {2, "conv parameter efficiency", conv_efficiency},
      {3, "MAC count", mac_count},
      {4, "optimizer memory", optimizer_memory},
      {5, "autograd anchor and grad checks", autograd_anchor},
      {6, "conv equivalence and speedup", conv_speedup},
      {7, "KV cache", kv_cache},
      {8, "Amdahl", amdahl},
      {9, "quantization", quantization},
      {10, "milestones 1-3", milestones_1_3},
      {11, "milestone 5", milestone_5},
      {12, "milestone 6", milestone_6},
  };
  using Clock = std::chrono::steady_clock;
  auto run = [&](const Criterion& c) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = std::string("threw: ") + e.what();
    }
    return std::pair{o, std::chrono::duration<double>(Clock::now() - t0).count()};
  };

  bool all = true;
  std::vector<Run> first;
  for (const auto& c : criteria) {
    auto [o, secs] = run(c);
    print(c.id, c.name, o, secs);
    all = all && o.pass;
    first.push_back({o.pass, o.metrics});
  }

  // 13: rerun everything with the same seed.
  Outcome det;
  const auto t0 = Clock::now();
  std::size_t compared = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    auto [o, secs] = run(criteria[i]);
    const std::string id = std::to_string(criteria[i].id);
    det.require(o.pass == first[i].pass, "criterion " + id + " pass/fail changed");
    det.require(o.metrics.size() == first[i].metrics.size(), "criterion " + id + " metric set changed");
    for (std::size_t m = 0; m < o.metrics.size() && m < first[i].metrics.size(); ++m) {
      const auto& [name, v] = o.metrics[m];
      const double w = first[i].metrics[m].second;
      const bool same = name == first[i].metrics[m].first && (v == w || (std::isnan(v) && std::isnan(w)));
      det.require(same, "criterion " + id + " " + name + ": " + fmt(w, 17) + " vs " + fmt(v, 17));
      ++compared;
    }
  }
  det.summary = "rerun of 12 criteria, " + std::to_string(compared) + " metrics compared, " +
                std::to_string(det.failures.size()) + " differences";
  print(13, "determinism", det, std::chrono::duration<double>(Clock::now() - t0).count());
  all = all && det.pass;

  std::printf("%s\n", all ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL");
  return all ? 0 : 1;
}
