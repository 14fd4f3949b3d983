#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tt/data.hpp"
#include "tt/optim.hpp"
#include "tt/tensor.hpp"

namespace tt {

// Anything trainable: a forward pass producing logits and its parameters.
class Model {
 public:
  virtual ~Model() = default;
  virtual Tensor forward(const Tensor& inputs) const = 0;
  virtual std::vector<Tensor> parameters() const = 0;
};

/// lr_min + 0.5 (lr_max - lr_min)(1 + cos(pi * step / total_steps)).
double cosine_lr(std::size_t step, std::size_t total_steps, double lr_max, double lr_min);

// Global L2 norm over all grads.
double grad_norm(const std::vector<Tensor>& params);

/// Scales every grad by max_norm / norm when the global norm exceeds
/// max_norm. Returns the applied factor (1.0 when untouched).
double clip_grad_norm(const std::vector<Tensor>& params, double max_norm);

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  OptimizerKind optimizer = OptimizerKind::Adam;
  OptimizerHyper hyper = default_hyper(OptimizerKind::Adam);
  double lr_max = 1e-2;
  double lr_min = 0.0;
  std::optional<double> clip_norm;
  std::uint64_t seed = 0;
  bool shuffle = true;
  // Stops after this many optimizer steps when set.
  std::optional<std::size_t> max_steps;
  // Defaults to cross_entropy_loss.
  std::function<Tensor(const Tensor& logits, const Tensor& targets)> loss;
  // Called after backward, before clipping; tests use it for fault injection.
  std::function<void(std::size_t step, const std::vector<Tensor>& params)> after_backward;
  // JSON-lines progress {epoch, loss, acc, lr, peak_bytes}, one per epoch.
  std::ostream* progress = nullptr;
};

struct EpochStats {
  double loss = 0;
  double accuracy = 0;
  double lr = 0;
  double wall_seconds = 0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::vector<double> step_losses;
  std::int64_t peak_bytes = 0;
  std::size_t steps = 0;
};

/// forward -> loss -> backward -> clip -> step -> zero_grad per batch, with
/// a cosine schedule over all optimizer steps. Throws NonFiniteLoss naming
/// the step when the loss or gradient norm stops being finite.
TrainReport train(const Model& model, const Dataset& dataset, const TrainConfig& config);

// Argmax accuracy of logits (..., classes) against int64 targets (...).
double accuracy(const Tensor& logits, const Tensor& targets);

// Evaluates in batches without recording a graph.
double evaluate_accuracy(const Model& model, const TensorDataset& dataset,
                         std::size_t batch_size = 256);

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// Binary container: "TTCK", u16 version, u32 manifest length, UTF-8 JSON
/// manifest [{name, shape, dtype, offset, byte_len}], then raw
/// little-endian buffers (offsets relative to the end of the manifest).
void checkpoint_save(const NamedTensors& tensors, const std::string& path);
NamedTensors checkpoint_load(const std::string& path);
// Copies stored values into existing tensors by name (MissingTensor if absent).
void checkpoint_load_into(const std::string& path, const NamedTensors& targets);

inline constexpr std::uint16_t kCheckpointVersion = 1;

}  // namespace tt
