#include "tt/optim.hpp"

#include <cmath>

namespace tt {

std::string_view optimizer_name(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::SGD: return "sgd";
    case OptimizerKind::Momentum: return "momentum";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::AdamW: return "adamw";
  }
  return "unknown";
}

OptimizerHyper default_hyper(OptimizerKind kind) {
  OptimizerHyper h;
  switch (kind) {
    case OptimizerKind::SGD:
    case OptimizerKind::Momentum: h.lr = 0.01f; break;
    case OptimizerKind::Adam: break;
    case OptimizerKind::AdamW: h.weight_decay = 0.01f; break;
  }
  return h;
}

std::size_t buffers_per_param(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::SGD: return 0;
    case OptimizerKind::Momentum: return 1;
    case OptimizerKind::Adam:
    case OptimizerKind::AdamW: return 2;
  }
  return 0;
}

OptimizerState optimizer_new(OptimizerKind kind, const std::vector<Tensor>& params,
                             const OptimizerHyper& hyper) {
  if (params.empty()) fail(ErrorCode::EmptyParamList, "optimizer needs at least one parameter");
  OptimizerState state;
  state.kind = kind;
  state.hyper = hyper;
  state.buffers.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_float(params[i], "optimizer parameter");
    for (std::size_t b = 0; b < buffers_per_param(kind); ++b) {
      state.buffers[i].push_back(Tensor::zeros(params[i].shape()));
    }
  }
  return state;
}

OptimizerState optimizer_new(OptimizerKind kind, const std::vector<Tensor>& params) {
  return optimizer_new(kind, params, default_hyper(kind));
}

void step(OptimizerState& state, const std::vector<Tensor>& params) {
  if (params.size() != state.buffers.size()) {
    fail(ErrorCode::InvalidArgument, "parameter list does not match optimizer state");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      fail(ErrorCode::MissingGrad, "parameter " + std::to_string(i) + " has no grad");
    }
  }
  state.step_count += 1;
  const OptimizerHyper& h = state.hyper;
  const float t = static_cast<float>(state.step_count);
  const float c1 = h.bias_correction ? 1.0f - std::pow(h.beta1, t) : 1.0f;
  const float c2 = h.bias_correction ? 1.0f - std::pow(h.beta2, t) : 1.0f;

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    auto w = p.data_mut();
    const Tensor grad = *p.grad();
    auto g = grad.data();
    switch (state.kind) {
      case OptimizerKind::SGD:
        for (std::size_t k = 0; k < w.size(); ++k) w[k] -= h.lr * g[k];
        break;
      case OptimizerKind::Momentum: {
        auto vel = state.buffers[i][0].data_mut();
        for (std::size_t k = 0; k < w.size(); ++k) {
          vel[k] = h.momentum * vel[k] + g[k];
          w[k] -= h.lr * vel[k];
        }
        break;
      }
      case OptimizerKind::Adam:
      case OptimizerKind::AdamW: {
        auto m = state.buffers[i][0].data_mut();
        auto v = state.buffers[i][1].data_mut();
        const bool decay = state.kind == OptimizerKind::AdamW && h.weight_decay != 0.0f;
        for (std::size_t k = 0; k < w.size(); ++k) {
          m[k] = h.beta1 * m[k] + (1.0f - h.beta1) * g[k];
          v[k] = h.beta2 * v[k] + (1.0f - h.beta2) * g[k] * g[k];
          if (decay) w[k] -= h.lr * h.weight_decay * w[k];
          const float m_hat = m[k] / c1;
          const float v_hat = v[k] / c2;
          w[k] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
        }
        break;
      }
    }
  }
}

OptimizerBytes optimizer_state_bytes(const OptimizerState& state, const std::vector<Tensor>& params) {
  OptimizerBytes out;
  for (const auto& p : params) {
    out.param_bytes += memory_footprint(p);
    if (auto g = p.grad()) out.grad_bytes += memory_footprint(*g);
  }
  for (const auto& list : state.buffers) {
    for (const auto& b : list) out.state_bytes += memory_footprint(b);
  }
  out.optimizer_related_total = out.grad_bytes + out.state_bytes;
  return out;
}

TrainingMemoryEstimate estimate_training_memory(double param_count, OptimizerKind kind) {
  TrainingMemoryEstimate e;
  e.weight_bytes = param_count * 4.0;
  e.grad_bytes = e.weight_bytes;
  e.state_bytes = e.weight_bytes * static_cast<double>(buffers_per_param(kind));
  e.total_bytes = e.weight_bytes + e.grad_bytes + e.state_bytes;
  return e;
}

}  // namespace tt
