#include "tt/models.hpp"

#include "tt/ops.hpp"

namespace tt {

namespace {

Tensor flatten(const Tensor& x) {
  const std::size_t b = x.dim(0);
  return x.rank() == 2 ? x : reshape(x, {b, x.numel() / b});
}

}  // namespace

MLP::MLP(const std::vector<std::size_t>& sizes, Activation hidden, SplitMix64& rng)
    : hidden_activation(hidden) {
  if (sizes.size() < 2) fail(ErrorCode::InvalidArgument, "MLP needs at least input and output sizes");
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) layers.emplace_back(sizes[i], sizes[i + 1], rng);
}

Tensor MLP::forward(const Tensor& inputs) const {
  Tensor x = flatten(inputs);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i].forward(x);
    if (i + 1 < layers.size()) x = activation(hidden_activation, x, 1);
  }
  return x;
}

std::vector<Tensor> MLP::parameters() const {
  std::vector<Tensor> out;
  for (const auto& l : layers) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

NamedTensors MLP::named() const {
  NamedTensors out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    out.emplace_back("layers." + std::to_string(i) + ".weight", layers[i].weight);
    out.emplace_back("layers." + std::to_string(i) + ".bias", layers[i].bias);
  }
  return out;
}

std::size_t MLP::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.parameter_count();
  return n;
}

CNN::CNN(std::size_t in_channels, std::size_t image, std::size_t channels, std::size_t hidden,
         std::size_t classes, SplitMix64& rng, ConvRoute route)
    : conv(in_channels, channels, 3, rng, 1, 1),
      fc1(channels * (image / 2) * (image / 2), hidden, rng),
      fc2(hidden, classes, rng),
      route(route) {}

Tensor CNN::features(const Tensor& inputs) const {
  Tensor y = route == ConvRoute::Fast ? conv2d_fast(inputs, conv) : conv2d_naive(inputs, conv);
  return maxpool2d(relu(y), 2);
}

Tensor CNN::classify(const Tensor& features) const {
  return fc2.forward(relu(fc1.forward(flatten(features))));
}

Tensor CNN::forward(const Tensor& inputs) const { return classify(features(inputs)); }

std::vector<Tensor> CNN::parameters() const {
  return {conv.weight, conv.bias, fc1.weight, fc1.bias, fc2.weight, fc2.bias};
}

NamedTensors CNN::named() const {
  return {{"conv.weight", conv.weight}, {"conv.bias", conv.bias}, {"fc1.weight", fc1.weight},
          {"fc1.bias", fc1.bias},       {"fc2.weight", fc2.weight}, {"fc2.bias", fc2.bias}};
}

std::size_t CNN::parameter_count() const {
  return conv.parameter_count() + fc1.parameter_count() + fc2.parameter_count();
}

QuantizedCNN::QuantizedCNN(const CNN& source)
    : stride(source.conv.stride), padding(source.conv.padding) {
  for (const Tensor& p : source.parameters()) tensors.push_back(quantize(p.detach()));
}

Tensor QuantizedCNN::forward(const Tensor& inputs) const {
  const Conv2dLayer conv(dequantize(tensors[0]), dequantize(tensors[1]), stride, padding);
  Tensor x = maxpool2d(relu(conv2d_fast(inputs, conv)), 2);
  x = flatten(x);
  x = relu(linear(x, dequantize(tensors[2]), dequantize(tensors[3])));
  return linear(x, dequantize(tensors[4]), dequantize(tensors[5]));
}

std::size_t QuantizedCNN::model_bytes() const {
  std::size_t n = 0;
  for (const auto& q : tensors) n += q.footprint();
  return n;
}

std::size_t parameter_bytes(const std::vector<Tensor>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += memory_footprint(p);
  return n;
}

}  // namespace tt
