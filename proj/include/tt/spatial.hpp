#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tt/rng.hpp"
#include "tt/tensor.hpp"

namespace tt {

struct Conv2dLayer {
  // Xavier-uniform weights with fan_in = C_in*K*K, fan_out = C_out*K*K;
  // zero bias. Parameters require grad iff grad mode is on.
  Conv2dLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
              SplitMix64& rng, std::size_t stride = 1, std::size_t padding = 0);
  Conv2dLayer(Tensor weight, Tensor bias, std::size_t stride = 1, std::size_t padding = 0);

  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t out_channels() const { return weight.dim(0); }
  std::size_t kernel_h() const { return weight.dim(2); }
  std::size_t kernel_w() const { return weight.dim(3); }
  std::size_t parameter_count() const { return weight.numel() + bias.numel(); }
  std::vector<Tensor> parameters() const { return {weight, bias}; }

  Tensor weight;  // (C_out, C_in, K_h, K_w)
  Tensor bias;    // (C_out)
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// floor((in + 2p - k) / s) + 1; KernelTooLarge when the padded input is
// smaller than the kernel.
std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride,
                             std::size_t padding);

/// Direct seven-loop cross-correlation, serial. Padded positions read as 0
/// and still execute their multiply. When `mac_counter` is given it is
/// incremented once per multiply statement executed.
Tensor conv2d_naive(const Tensor& input, const Conv2dLayer& layer,
                    std::uint64_t* mac_counter = nullptr);

/// Rows are receptive fields ordered (b, h_out, w_out); columns are
/// (c_in, k_h, k_w). Output (B*H_out*W_out, C_in*K_h*K_w).
Tensor im2col(const Tensor& input, std::size_t kernel_h, std::size_t kernel_w, std::size_t stride,
              std::size_t padding);

// im2col followed by one GEMM against the reshaped weights.
Tensor conv2d_fast(const Tensor& input, const Conv2dLayer& layer);

/// Window maxima; backward sends each window's gradient to its first
/// maximum in row-major scan order. Stride defaults to the window.
Tensor maxpool2d(const Tensor& input, std::size_t window, std::size_t stride = 0);

struct ConvAccounting {
  std::uint64_t param_count = 0;
  std::uint64_t macs = 0;
  std::uint64_t flops() const { return 2 * macs; }
  Shape output_shape;
};

ConvAccounting conv_accounting(std::size_t in_channels, std::size_t out_channels,
                               std::size_t kernel_h, std::size_t kernel_w, const Shape& input_shape,
                               std::size_t stride = 1, std::size_t padding = 0);
ConvAccounting conv_accounting(const Conv2dLayer& layer, const Shape& input_shape);

}  // namespace tt
