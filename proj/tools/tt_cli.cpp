// tt-cli: milestones, benchmarks, profiles, submissions and tape graphs.
//
// Exit codes: 0 success, 1 milestone failure or runtime error, 2 usage error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "tt/harness.hpp"
#include "tt/train.hpp"

namespace {

constexpr int kUsageError = 2;

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

void print_milestone(const tt::MilestoneResult& r) {
  std::printf("milestone %d: %s  %s = %.6g  (%.2f s, seed %llu)\n", r.milestone_id,
              r.pass ? "PASS" : "FAIL", r.metric.c_str(), r.value, r.wall_seconds,
              static_cast<unsigned long long>(r.seed));
  for (const auto& [k, v] : r.details) std::printf("  %-26s %.6g\n", k.c_str(), v);
  if (!r.pass) std::printf("  failed: %s\n", r.failed_criterion.c_str());
}

void print_profile(const tt::ProfileReport& p) {
  std::printf("%-14s %12s %6s %12s %12s %14s\n", "region", "wall_us", "frac", "alloc_B", "peak_B", "macs");
  auto row = [](const tt::RegionStats& r) {
    std::printf("%-14s %12.1f %6.3f %12lld %12lld %14llu\n", r.label.c_str(), r.wall_ns / 1e3,
                r.fraction, static_cast<long long>(r.alloc_bytes),
                static_cast<long long>(r.peak_bytes), static_cast<unsigned long long>(r.macs));
  };
  for (const auto& r : p.regions) row(r);
  row(p.total);
  std::printf("profiler overhead per region: %lld ns (timer resolution %lld ns)\n",
              static_cast<long long>(p.overhead_ns), static_cast<long long>(tt::timer_resolution_ns()));
}

void print_bench(const tt::BenchTargetResult& r) {
  auto line = [](const std::string& label, const tt::BenchmarkResult& b) {
    std::printf("%-16s mean %10.3f ms  std %8.3f ms  %.0f%% CI [%.3f, %.3f] ms  (n=%zu, warmup %zu)\n",
                label.c_str(), b.mean_ns / 1e6, b.std_ns / 1e6, b.ci.level * 100, b.ci.lo_ns / 1e6,
                b.ci.hi_ns / 1e6, b.repeats, b.warmup);
  };
  line(r.baseline_label, r.baseline);
  line(r.optimized_label, r.optimized);
  std::printf("speedup %.2fx  (Welch p = %.3g, %s)  max |diff| = %.3g\n", r.comparison.speedup,
              r.comparison.p_value, r.comparison.significant ? "significant" : "not significant",
              r.max_abs_diff);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tt-cli: run milestones, benchmarks and submissions"};
  app.require_subcommand(1);

  auto* milestone = app.add_subcommand("milestone", "run a historical milestone (1-6)");
  int milestone_id = 0;
  std::uint64_t seed = 42;
  bool json = false;
  std::string save_model, out_path;
  milestone->add_option("id", milestone_id, "milestone id")->required()->check(CLI::Range(1, 6));
  milestone->add_option("--seed", seed, "seed");
  milestone->add_flag("--json", json, "JSON output");
  milestone->add_option("--save-model", save_model, "milestone 4: checkpoint path for the CNN");
  milestone->add_option("--out", out_path, "milestone 6: submission path");

  auto* bench = app.add_subcommand("bench", "benchmark baseline vs optimized kernels");
  std::string bench_target;
  std::size_t warmup = 3, repeats = 20;
  double level = 0.95;
  bench->add_option("target", bench_target, "one of: " + join(tt::bench_targets()))
      ->required()
      ->check(CLI::IsMember(tt::bench_targets()));
  bench->add_option("--warmup", warmup, "discarded warm-up runs");
  bench->add_option("--repeats", repeats, "timed runs")->check(CLI::PositiveNumber);
  bench->add_option("--level", level, "confidence level")->check(CLI::Range(0.5, 0.9999));
  bench->add_option("--seed", seed, "seed");
  bench->add_flag("--json", json, "JSON output");

  auto* prof = app.add_subcommand("profile", "per-region time, memory and MAC profile");
  std::string profile_target;
  prof->add_option("target", profile_target, "one of: " + join(tt::profile_targets()))
      ->required()
      ->check(CLI::IsMember(tt::profile_targets()));
  prof->add_option("--seed", seed, "seed");
  prof->add_flag("--json", json, "JSON output");

  auto* submit = app.add_subcommand("submit", "optimize a digits CNN checkpoint and write a submission");
  std::string model_path;
  submit->add_option("--model", model_path, "checkpoint from `milestone 4 --save-model`")->required();
  submit->add_option("--out", out_path, "submission JSON path")->required();
  submit->add_option("--seed", seed, "seed");

  auto* validate = app.add_subcommand("validate", "check a submission file");
  std::string validate_path;
  validate->add_option("path", validate_path, "submission JSON")->required();

  auto* graph = app.add_subcommand("graph", "print the recorded tape of a demo");
  std::string demo;
  bool dot = false;
  graph->add_option("demo", demo, "one of: " + join(tt::graph_demos()))
      ->required()
      ->check(CLI::IsMember(tt::graph_demos()));
  graph->add_flag("--dot", dot, "Graphviz output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*milestone) {
      tt::MilestoneOptions opts;
      opts.seed = seed;
      if (!save_model.empty()) opts.save_model = save_model;
      if (!out_path.empty()) opts.submission_path = out_path;
      const tt::MilestoneResult r = tt::run_milestone(milestone_id, opts);
      if (json) {
        std::cout << r.to_json().dump(2) << '\n';
      } else {
        print_milestone(r);
      }
      return r.pass ? 0 : 1;
    }
    if (*bench) {
      const auto r = tt::run_bench_target(bench_target, warmup, repeats, level, seed);
      if (json) {
        std::cout << r.to_json().dump(2) << '\n';
      } else {
        print_bench(r);
      }
      return 0;
    }
    if (*prof) {
      const auto p = tt::profile_target(profile_target, seed);
      if (json) {
        std::cout << p.to_json() << '\n';
      } else {
        print_profile(p);
      }
      return 0;
    }
    if (*submit) {
      tt::CNN cnn = tt::make_digits_cnn(seed);
      tt::checkpoint_load_into(model_path, cnn.named());
      tt::PipelineOptions po;
      po.seed = seed;
      const auto rep = tt::optimization_pipeline(cnn, tt::digit_split(seed).test, po);
      std::ofstream(out_path) << rep.submission.to_json().dump(2) << '\n';
      const auto v = tt::validate_submission(out_path);
      std::printf("wrote %s: speedup %.2fx, compression %.3fx, accuracy delta %+.4f, %s\n",
                  out_path.c_str(), rep.submission.speedup, rep.submission.compression_ratio,
                  rep.submission.accuracy_delta, v.valid ? "valid" : "INVALID");
      for (const auto& msg : v.violations) std::printf("  violation: %s\n", msg.c_str());
      return v.valid ? 0 : 1;
    }
    if (*validate) {
      const auto v = tt::validate_submission(validate_path);
      std::printf("%s\n", v.valid ? "valid" : "invalid");
      for (const auto& msg : v.violations) std::printf("  violation: %s\n", msg.c_str());
      return v.valid ? 0 : 1;
    }
    if (*graph) {
      std::cout << tt::graph_demo(demo);
      return 0;
    }
  } catch (const tt::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kUsageError;
}
