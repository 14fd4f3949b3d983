#pragma once

#include <cstddef>
#include <vector>

#include "tt/nn.hpp"
#include "tt/perf.hpp"
#include "tt/rng.hpp"
#include "tt/spatial.hpp"
#include "tt/train.hpp"

namespace tt {

// Fully connected stack; inputs are flattened to (B, features).
class MLP : public Model {
 public:
  MLP(const std::vector<std::size_t>& sizes, Activation hidden, SplitMix64& rng);

  Tensor forward(const Tensor& inputs) const override;
  std::vector<Tensor> parameters() const override;
  NamedTensors named() const;
  std::size_t parameter_count() const;

  std::vector<LinearLayer> layers;
  Activation hidden_activation;
};

enum class ConvRoute { Naive, Fast };

/// conv(C -> channels, 3x3, pad 1) -> ReLU -> 2x2 max pool -> Linear(hidden)
/// -> ReLU -> Linear(classes), for square `image` inputs.
class CNN : public Model {
 public:
  CNN(std::size_t in_channels, std::size_t image, std::size_t channels, std::size_t hidden,
      std::size_t classes, SplitMix64& rng, ConvRoute route = ConvRoute::Fast);

  Tensor forward(const Tensor& inputs) const override;
  std::vector<Tensor> parameters() const override;
  NamedTensors named() const;
  std::size_t parameter_count() const;

  Tensor features(const Tensor& inputs) const;  // conv -> relu -> pool
  Tensor classify(const Tensor& features) const;

  Conv2dLayer conv;
  LinearLayer fc1, fc2;
  ConvRoute route;
};

// Every parameter tensor held as Int8; forward dequantizes on each call and
// runs the Float32 path (weight-only scheme) through conv2d_fast.
class QuantizedCNN : public Model {
 public:
  explicit QuantizedCNN(const CNN& source);

  Tensor forward(const Tensor& inputs) const override;
  std::vector<Tensor> parameters() const override { return {}; }
  // Sum of QuantizedTensor footprints.
  std::size_t model_bytes() const;

  std::vector<QuantizedTensor> tensors;  // conv.w, conv.b, fc1.w, fc1.b, fc2.w, fc2.b
  std::size_t stride, padding;
};

// Float32 bytes of all parameters.
std::size_t parameter_bytes(const std::vector<Tensor>& params);

}  // namespace tt
