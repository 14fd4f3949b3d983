#pragma once

#include <cstddef>
#include <vector>

#include "tt/rng.hpp"
#include "tt/tensor.hpp"

namespace tt {

enum class Activation { ReLU, Sigmoid, Tanh, GELU, Softmax };

// `axis` is only read for Softmax.
Tensor activation(Activation kind, const Tensor& x, std::size_t axis = 0);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
// tanh approximation: 0.5x(1 + tanh(sqrt(2/pi)(x + 0.044715x^3)))
Tensor gelu(const Tensor& x);
// Max-subtracted before exponentiation.
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);

/// Glorot-uniform (gain 1): U(-b, b), b = sqrt(6 / (fan_in + fan_out)),
/// shape (fan_out, fan_in).
Tensor xavier_init(std::size_t fan_in, std::size_t fan_out, SplitMix64& rng);
double xavier_bound(std::size_t fan_in, std::size_t fan_out);

/// x @ weight^T + bias over the trailing axis of x. One tape node saving x
/// and weight.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

struct LinearLayer {
  // Parameters require grad iff grad mode is on at construction.
  LinearLayer(std::size_t in_features, std::size_t out_features, SplitMix64& rng);
  LinearLayer(Tensor weight, Tensor bias);

  Tensor forward(const Tensor& x) const { return linear(x, weight, bias); }
  std::size_t parameter_count() const { return weight.numel() + bias.numel(); }
  std::vector<Tensor> parameters() const { return {weight, bias}; }

  Tensor weight;  // (out_features, in_features)
  Tensor bias;    // (out_features)
  std::size_t in_features;
  std::size_t out_features;
};

constexpr std::size_t linear_parameter_count(std::size_t in_features, std::size_t out_features) {
  return out_features * in_features + out_features;
}

/// Mean over rows of logsumexp(logits_i) - logits_i[target_i]. Logits may
/// be (rows, classes) or any (..., classes) with targets shaped (...).
Tensor cross_entropy_loss(const Tensor& logits, const Tensor& targets);

Tensor mse_loss(const Tensor& pred, const Tensor& target);

}  // namespace tt
