#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "tt/data.hpp"
#include "tt/models.hpp"

namespace tt {

struct MilestoneResult {
  int milestone_id = 0;
  bool pass = false;
  std::string metric;
  double value = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  // Name of the first criterion that did not hold; empty on a pass.
  std::string failed_criterion;
  // Further non-timing figures (parameter counts, losses, ...).
  std::vector<std::pair<std::string, double>> details;

  nlohmann::json to_json() const;
};

struct MilestoneOptions {
  std::uint64_t seed = 42;
  // Milestone 4 saves its CNN here; milestone 6 writes its submission here
  // (default: a file in the system temp directory).
  std::optional<std::string> save_model;
  std::optional<std::string> submission_path;
};

/// Runs milestone 1-6. A failed criterion is reported through pass and
/// failed_criterion; InvalidArgument for an unknown id.
MilestoneResult run_milestone(int id, const MilestoneOptions& options = {});
// Throws MilestoneFailed naming the criterion unless r.pass.
void require_pass(const MilestoneResult& r);

// Milestone 1 building block: Linear(2 -> 1) + sigmoid trained full-batch
// on four points; returns its accuracy (threshold 0.5) on those points.
double perceptron_accuracy(const Tensor& inputs, const Tensor& labels, std::uint64_t seed);

// inputs (4, 2) over {0,1}^2 and float labels (4, 1).
enum class Gate { Or, And, Xor };
std::pair<Tensor, Tensor> gate_data(Gate gate);

// ---- digits helpers shared with the CLI and tests --------------------------

struct DigitSplit {
  TensorDataset train;
  TensorDataset test;
};

// synth_digits(seed, 1000): first 800 samples train, last 200 test.
DigitSplit digit_split(std::uint64_t seed);
TrainConfig digits_train_config(std::uint64_t seed);
inline constexpr std::size_t kDigitHidden = 64;
inline constexpr std::size_t kDigitChannels = 16;
CNN make_digits_cnn(std::uint64_t seed, ConvRoute route = ConvRoute::Fast);
MLP make_digits_mlp(std::uint64_t seed);

// ---- submissions -----------------------------------------------------------

struct SystemInfo {
  std::string os_name;
  std::string cpu_model;
  std::size_t logical_cores = 0;
  std::uint64_t ram_bytes = 0;
};

SystemInfo system_info();

struct SubmissionMetrics {
  double latency_ms_p50 = 0.0;
  double latency_ms_p99 = 0.0;
  double throughput_per_s = 0.0;
  double accuracy = 0.0;
  std::uint64_t model_bytes = 0;
};

struct Submission {
  std::string schema_version = "1.0";
  SystemInfo system;
  std::string model_id;
  std::string task_id;
  std::uint64_t seed = 0;
  SubmissionMetrics baseline;
  SubmissionMetrics optimized;
  double speedup = 0.0;
  double compression_ratio = 0.0;
  double accuracy_delta = 0.0;  // optimized - baseline accuracy
  std::string timestamp;        // RFC 3339, UTC

  nlohmann::json to_json() const;
};

// Current UTC time as "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_timestamp();

struct PipelineOptions {
  std::uint64_t seed = 42;
  double sparsity = 0.3;
  std::size_t warmup = 3;
  std::size_t repeats = 15;
  std::size_t batch = 200;
};

struct PipelineReport {
  Submission submission;
  ProfileReport profile;
  double achieved_sparsity = 0.0;
};

/// profile -> prune + quantize -> benchmark -> submission. The baseline is
/// `model` run through conv2d_naive in Float32; the optimized model is its
/// pruned, Int8-quantized copy run through conv2d_fast.
PipelineReport optimization_pipeline(const CNN& model, const TensorDataset& test,
                                     const PipelineOptions& options);

struct ValidationReport {
  bool valid = false;
  std::vector<std::string> violations;
};

// Collects every violation. FileNotFound when the path cannot be read.
ValidationReport validate_submission(const std::string& path);
ValidationReport validate_submission_json(const nlohmann::json& j);

// ---- CLI targets -----------------------------------------------------------

struct BenchTargetResult {
  std::string target;
  std::string baseline_label, optimized_label;
  BenchmarkResult baseline, optimized;
  Comparison comparison;  // speedup = baseline mean / optimized mean
  double max_abs_diff = 0.0;
  nlohmann::json to_json() const;
};

/// "conv": conv2d_naive vs conv2d_fast on (8,3,32,32) x (32,3,5,5).
/// "gemm": reference (serial triple loop) vs blocked parallel gemm, 256^3.
/// InvalidArgument for anything else.
BenchTargetResult run_bench_target(const std::string& target, std::size_t warmup,
                                   std::size_t repeats, double level, std::uint64_t seed);
const std::vector<std::string>& bench_targets();

/// "cnn": two-conv network forward on (8,3,32,32). "gpt": the Fig. 1c
/// config forward on (4, 64) ids.
ProfileReport profile_target(const std::string& target, std::uint64_t seed);
const std::vector<std::string>& profile_targets();

/// "square": y = x*x. "mlp": a 2-layer MLP loss. "attention": one causal
/// self-attention head. Graphviz text of the recorded tape.
std::string graph_demo(const std::string& demo);
const std::vector<std::string>& graph_demos();

}  // namespace tt
