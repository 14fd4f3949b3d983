#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "tt/tensor.hpp"

namespace tt {

enum class OptimizerKind { SGD, Momentum, Adam, AdamW };

std::string_view optimizer_name(OptimizerKind kind);

struct OptimizerHyper {
  float lr = 0.001f;
  float momentum = 0.9f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float weight_decay = 0.0f;
  // Off reproduces the uncorrected update m / (sqrt(v) + eps).
  bool bias_correction = true;
};

// SGD/Momentum: lr 0.01, momentum 0.9. Adam: lr 0.001, betas (0.9, 0.999),
// eps 1e-8. AdamW: Adam plus weight_decay 0.01.
OptimizerHyper default_hyper(OptimizerKind kind);

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::SGD;
  OptimizerHyper hyper;
  // buffers[i] holds the auxiliary tensors of parameter i: none for SGD,
  // {velocity} for Momentum, {m, v} for Adam/AdamW.
  std::vector<std::vector<Tensor>> buffers;
  std::size_t step_count = 0;
};

std::size_t buffers_per_param(OptimizerKind kind);

OptimizerState optimizer_new(OptimizerKind kind, const std::vector<Tensor>& params,
                             const OptimizerHyper& hyper);
OptimizerState optimizer_new(OptimizerKind kind, const std::vector<Tensor>& params);

/// In-place update of every parameter from its grad. MissingGrad names the
/// first parameter index without one. Parameter buffers are never replaced.
void step(OptimizerState& state, const std::vector<Tensor>& params);

struct OptimizerBytes {
  std::size_t param_bytes = 0;
  std::size_t grad_bytes = 0;
  std::size_t state_bytes = 0;
  std::size_t optimizer_related_total = 0;  // grad_bytes + state_bytes
};

OptimizerBytes optimizer_state_bytes(const OptimizerState& state, const std::vector<Tensor>& params);

// Closed-form training memory for `param_count` Float32 parameters:
// weights + grads + optimizer buffers. Decimal and binary units both given.
struct TrainingMemoryEstimate {
  double weight_bytes = 0;
  double grad_bytes = 0;
  double state_bytes = 0;
  double total_bytes = 0;
  double total_tb() const { return total_bytes / 1e12; }
  double total_tib() const { return total_bytes / 1099511627776.0; }
};

TrainingMemoryEstimate estimate_training_memory(double param_count, OptimizerKind kind);

}  // namespace tt
