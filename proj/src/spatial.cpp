#include "tt/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tt/autograd.hpp"
#include "tt/counters.hpp"
#include "tt/kernels.hpp"
#include "tt/parallel.hpp"

namespace tt {

namespace {

struct ConvGeometry {
  std::size_t batch, c_in, h, w, c_out, kh, kw, stride, pad, h_out, w_out;
  std::size_t rows() const { return batch * h_out * w_out; }
  std::size_t cols() const { return c_in * kh * kw; }
};

ConvGeometry geometry(const Shape& input, std::size_t c_out, std::size_t c_in_w, std::size_t kh,
                      std::size_t kw, std::size_t stride, std::size_t pad) {
  if (input.size() != 4) {
    fail(ErrorCode::ShapeMismatch, "conv2d expects (B, C, H, W), got " + shape_str(input));
  }
  if (input[1] != c_in_w) {
    fail(ErrorCode::ShapeMismatch, "conv2d input has " + std::to_string(input[1]) +
                                       " channels, kernel expects " + std::to_string(c_in_w));
  }
  if (stride == 0) fail(ErrorCode::InvalidArgument, "stride must be >= 1");
  ConvGeometry g{input[0], input[1], input[2], input[3], c_out, kh, kw, stride, pad, 0, 0};
  g.h_out = conv_output_size(g.h, kh, stride, pad);
  g.w_out = conv_output_size(g.w, kw, stride, pad);
  return g;
}

ConvGeometry geometry(const Shape& input, const Conv2dLayer& layer) {
  return geometry(input, layer.out_channels(), layer.in_channels(), layer.kernel_h(),
                  layer.kernel_w(), layer.stride, layer.padding);
}

// Reads input[b, c, y, x] with zero padding.
inline float padded(const float* in, const ConvGeometry& g, std::size_t b, std::size_t c, long y,
                    long x) {
  if (y < 0 || x < 0 || y >= static_cast<long>(g.h) || x >= static_cast<long>(g.w)) return 0.0f;
  return in[((b * g.c_in + c) * g.h + static_cast<std::size_t>(y)) * g.w + static_cast<std::size_t>(x)];
}

void im2col_kernel(const float* in, const ConvGeometry& g, float* cols) {
  const long rows = static_cast<long>(g.rows());
  const std::size_t ncols = g.cols();
  TT_OMP(parallel for schedule(static) if (rows * static_cast<long>(ncols) >= kParallelGrain))
  for (long r = 0; r < rows; ++r) {
    const std::size_t ur = static_cast<std::size_t>(r);
    const std::size_t b = ur / (g.h_out * g.w_out);
    const std::size_t oh = (ur / g.w_out) % g.h_out;
    const std::size_t ow = ur % g.w_out;
    const long x0 = static_cast<long>(ow * g.stride) - static_cast<long>(g.pad);
    const bool row_inside = x0 >= 0 && x0 + static_cast<long>(g.kw) <= static_cast<long>(g.w);
    float* dst = cols + ur * ncols;
    for (std::size_t c = 0; c < g.c_in; ++c) {
      for (std::size_t i = 0; i < g.kh; ++i) {
        const long y = static_cast<long>(oh * g.stride + i) - static_cast<long>(g.pad);
        if (y < 0 || y >= static_cast<long>(g.h)) {
          std::fill(dst, dst + g.kw, 0.0f);
        } else if (row_inside) {
          const float* src = in + ((b * g.c_in + c) * g.h + static_cast<std::size_t>(y)) * g.w +
                             static_cast<std::size_t>(x0);
          std::copy(src, src + g.kw, dst);
        } else {
          for (std::size_t j = 0; j < g.kw; ++j) dst[j] = padded(in, g, b, c, y, x0 + static_cast<long>(j));
        }
        dst += g.kw;
      }
    }
  }
}

// Scatter-add of column gradients back to the input layout.
void col2im_kernel(const float* cols, const ConvGeometry& g, float* in) {
  const std::size_t ncols = g.cols();
  // Parallel over images: each batch element's input slice is owned by one thread.
  const long batch = static_cast<long>(g.batch);
  TT_OMP(parallel for schedule(static) if (g.rows() * ncols >= static_cast<std::size_t>(kParallelGrain)))
  for (long bl = 0; bl < batch; ++bl) {
    const std::size_t b = static_cast<std::size_t>(bl);
    for (std::size_t oh = 0; oh < g.h_out; ++oh) {
      for (std::size_t ow = 0; ow < g.w_out; ++ow) {
        const float* src = cols + ((b * g.h_out + oh) * g.w_out + ow) * ncols;
        for (std::size_t c = 0; c < g.c_in; ++c) {
          for (std::size_t i = 0; i < g.kh; ++i) {
            const long y = static_cast<long>(oh * g.stride + i) - static_cast<long>(g.pad);
            for (std::size_t j = 0; j < g.kw; ++j, ++src) {
              const long x = static_cast<long>(ow * g.stride + j) - static_cast<long>(g.pad);
              if (y < 0 || x < 0 || y >= static_cast<long>(g.h) || x >= static_cast<long>(g.w)) {
                continue;
              }
              in[((b * g.c_in + c) * g.h + static_cast<std::size_t>(y)) * g.w +
                 static_cast<std::size_t>(x)] += *src;
            }
          }
        }
      }
    }
  }
}

}  // namespace

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride,
                             std::size_t padding) {
  if (stride == 0) fail(ErrorCode::InvalidArgument, "stride must be >= 1");
  if (kernel == 0 || in + 2 * padding < kernel) {
    fail(ErrorCode::KernelTooLarge, "kernel " + std::to_string(kernel) + " exceeds padded input " +
                                        std::to_string(in + 2 * padding));
  }
  return (in + 2 * padding - kernel) / stride + 1;
}

Conv2dLayer::Conv2dLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                         SplitMix64& rng, std::size_t stride_, std::size_t padding_)
    : stride(stride_), padding(padding_) {
  const std::size_t fan_in = in_channels * kernel * kernel;
  const std::size_t fan_out = out_channels * kernel * kernel;
  const double b = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<float> w(out_channels * fan_in);
  for (auto& v : w) v = static_cast<float>(rng.uniform(-b, b));
  weight = Tensor::from(std::move(w), {out_channels, in_channels, kernel, kernel});
  bias = Tensor::zeros({out_channels});
  if (grad_enabled()) {
    weight.set_requires_grad(true);
    bias.set_requires_grad(true);
  }
}

Conv2dLayer::Conv2dLayer(Tensor w, Tensor b, std::size_t stride_, std::size_t padding_)
    : weight(std::move(w)), bias(std::move(b)), stride(stride_), padding(padding_) {
  if (weight.rank() != 4 || bias.numel() != weight.dim(0)) {
    fail(ErrorCode::ShapeMismatch, "conv weight " + shape_str(weight.shape()) + " / bias " +
                                       shape_str(bias.shape()));
  }
}

Tensor conv2d_naive(const Tensor& input, const Conv2dLayer& layer, std::uint64_t* mac_counter) {
  require_float(input, "conv2d_naive");
  const ConvGeometry g = geometry(input.shape(), layer);
  Tensor out = Tensor::empty({g.batch, g.c_out, g.h_out, g.w_out});
  const float* in = input.data().data();
  const float* wt = layer.weight.data().data();
  const float* bias = layer.bias.data().data();
  float* o = out.data_mut().data();
  std::uint64_t macs = 0;

  // Count: 1,2,3,4,5,6,7 loops.
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t co = 0; co < g.c_out; ++co) {
      for (std::size_t h = 0; h < g.h_out; ++h) {
        for (std::size_t w = 0; w < g.w_out; ++w) {
          float acc = bias[co];
          for (std::size_t ci = 0; ci < g.c_in; ++ci) {
            for (std::size_t kh = 0; kh < g.kh; ++kh) {
              for (std::size_t kw = 0; kw < g.kw; ++kw) {
                const long y = static_cast<long>(h * g.stride + kh) - static_cast<long>(g.pad);
                const long x = static_cast<long>(w * g.stride + kw) - static_cast<long>(g.pad);
                acc += padded(in, g, b, ci, y, x) * wt[((co * g.c_in + ci) * g.kh + kh) * g.kw + kw];
                if (mac_counter) ++macs;
              }
            }
          }
          o[((b * g.c_out + co) * g.h_out + h) * g.w_out + w] = acc;
        }
      }
    }
  }
  if (mac_counter) *mac_counter += macs;
  op_counters().macs += static_cast<std::uint64_t>(g.batch) * g.c_out * g.h_out * g.w_out * g.cols();

  if (!should_record({&input, &layer.weight, &layer.bias})) return out;
  return record(
      out, "conv2d_naive", {input, layer.weight, layer.bias}, {input, layer.weight},
      [g](const Node& n, const Tensor& grad) {
        const float* in = n.saved[0].data().data();
        const float* wt = n.saved[1].data().data();
        const float* gy = grad.data().data();
        Tensor gx = Tensor::zeros(n.saved[0].shape());
        Tensor gw = Tensor::zeros(n.saved[1].shape());
        Tensor gb = Tensor::zeros({g.c_out});
        float* px = gx.data_mut().data();
        float* pw = gw.data_mut().data();
        float* pb = gb.data_mut().data();
        for (std::size_t b = 0; b < g.batch; ++b) {
          for (std::size_t co = 0; co < g.c_out; ++co) {
            for (std::size_t h = 0; h < g.h_out; ++h) {
              for (std::size_t w = 0; w < g.w_out; ++w) {
                const float up = gy[((b * g.c_out + co) * g.h_out + h) * g.w_out + w];
                pb[co] += up;
                for (std::size_t ci = 0; ci < g.c_in; ++ci) {
                  for (std::size_t kh = 0; kh < g.kh; ++kh) {
                    for (std::size_t kw = 0; kw < g.kw; ++kw) {
                      const long y = static_cast<long>(h * g.stride + kh) - static_cast<long>(g.pad);
                      const long x = static_cast<long>(w * g.stride + kw) - static_cast<long>(g.pad);
                      const std::size_t wi = ((co * g.c_in + ci) * g.kh + kh) * g.kw + kw;
                      pw[wi] += up * padded(in, g, b, ci, y, x);
                      if (y >= 0 && x >= 0 && y < static_cast<long>(g.h) && x < static_cast<long>(g.w)) {
                        px[((b * g.c_in + ci) * g.h + static_cast<std::size_t>(y)) * g.w +
                           static_cast<std::size_t>(x)] += up * wt[wi];
                      }
                    }
                  }
                }
              }
            }
          }
        }
        return std::vector<Tensor>{gx, gw, gb};
      });
}

Tensor im2col(const Tensor& input, std::size_t kernel_h, std::size_t kernel_w, std::size_t stride,
              std::size_t padding) {
  require_float(input, "im2col");
  if (input.rank() != 4) {
    fail(ErrorCode::ShapeMismatch, "im2col expects (B, C, H, W), got " + shape_str(input.shape()));
  }
  const ConvGeometry g = geometry(input.shape(), 1, input.dim(1), kernel_h, kernel_w, stride, padding);
  Tensor cols = Tensor::empty({g.rows(), g.cols()});
  im2col_kernel(input.data().data(), g, cols.data_mut().data());
  return cols;
}

Tensor conv2d_fast(const Tensor& input, const Conv2dLayer& layer) {
  require_float(input, "conv2d_fast");
  const ConvGeometry g = geometry(input.shape(), layer);
  const std::size_t rows = g.rows(), ncols = g.cols(), spatial = g.h_out * g.w_out;
  Tensor cols = Tensor::empty({rows, ncols});
  im2col_kernel(input.data().data(), g, cols.data_mut().data());

  // (rows, ncols) @ (ncols, C_out) -> (rows, C_out), then scatter to NCHW.
  std::vector<float> wt(ncols * g.c_out);
  kernels::transpose2d(g.c_out, ncols, layer.weight.data().data(), wt.data());
  std::vector<float> prod(rows * g.c_out);
  kernels::gemm(rows, g.c_out, ncols, cols.data().data(), wt.data(), prod.data());
  Tensor out = Tensor::empty({g.batch, g.c_out, g.h_out, g.w_out});
  float* o = out.data_mut().data();
  const float* bias = layer.bias.data().data();
  const long batch = static_cast<long>(g.batch);
  TT_OMP(parallel for schedule(static) if (rows * g.c_out >= static_cast<std::size_t>(kParallelGrain)))
  for (long bl = 0; bl < batch; ++bl) {
    const std::size_t b = static_cast<std::size_t>(bl);
    for (std::size_t s = 0; s < spatial; ++s) {
      const float* src = prod.data() + (b * spatial + s) * g.c_out;
      for (std::size_t co = 0; co < g.c_out; ++co) {
        o[(b * g.c_out + co) * spatial + s] = src[co] + bias[co];
      }
    }
  }
  op_counters().macs += static_cast<std::uint64_t>(rows) * ncols * g.c_out;

  if (!should_record({&input, &layer.weight, &layer.bias})) return out;
  return record(
      out, "conv2d_fast", {input, layer.weight, layer.bias}, {cols, layer.weight},
      [g](const Node& n, const Tensor& grad) {
        const std::size_t rows = g.rows(), ncols = g.cols(), spatial = g.h_out * g.w_out;
        const float* gy = grad.data().data();
        std::vector<float> g_rows(rows * g.c_out);
        Tensor gb = Tensor::zeros({g.c_out});
        float* pb = gb.data_mut().data();
        for (std::size_t b = 0; b < g.batch; ++b) {
          for (std::size_t co = 0; co < g.c_out; ++co) {
            for (std::size_t s = 0; s < spatial; ++s) {
              const float v = gy[(b * g.c_out + co) * spatial + s];
              g_rows[(b * spatial + s) * g.c_out + co] = v;
              pb[co] += v;
            }
          }
        }
        std::vector<Tensor> grads(3);
        grads[2] = gb;
        if (n.inputs[1].active()) {
          std::vector<float> g_t(g.c_out * rows);
          kernels::transpose2d(rows, g.c_out, g_rows.data(), g_t.data());
          Tensor gw = Tensor::empty(n.saved[1].shape());
          kernels::gemm(g.c_out, ncols, rows, g_t.data(), n.saved[0].data().data(),
                        gw.data_mut().data());
          grads[1] = gw;
        }
        if (n.inputs[0].active()) {
          std::vector<float> g_cols(rows * ncols);
          kernels::gemm(rows, ncols, g.c_out, g_rows.data(), n.saved[1].data().data(),
                        g_cols.data());
          Tensor gx = Tensor::zeros({g.batch, g.c_in, g.h, g.w});
          col2im_kernel(g_cols.data(), g, gx.data_mut().data());
          grads[0] = gx;
        }
        return grads;
      });
}

Tensor maxpool2d(const Tensor& input, std::size_t window, std::size_t stride) {
  require_float(input, "maxpool2d");
  if (input.rank() != 4) {
    fail(ErrorCode::ShapeMismatch, "maxpool2d expects (B, C, H, W), got " + shape_str(input.shape()));
  }
  if (stride == 0) stride = window;
  const std::size_t B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  if (window == 0 || window > H || window > W) {
    fail(ErrorCode::WindowTooLarge,
         "window " + std::to_string(window) + " for input " + shape_str(input.shape()));
  }
  const std::size_t ho = (H - window) / stride + 1;
  const std::size_t wo = (W - window) / stride + 1;
  Tensor out = Tensor::empty({B, C, ho, wo});
  std::vector<std::int64_t> arg(B * C * ho * wo);
  const float* in = input.data().data();
  float* o = out.data_mut().data();
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    const float* plane = in + bc * H * W;
    for (std::size_t i = 0; i < ho; ++i) {
      for (std::size_t j = 0; j < wo; ++j) {
        std::size_t best = (i * stride) * W + j * stride;
        for (std::size_t di = 0; di < window; ++di) {
          for (std::size_t dj = 0; dj < window; ++dj) {
            const std::size_t k = (i * stride + di) * W + j * stride + dj;
            if (plane[k] > plane[best]) best = k;
          }
        }
        const std::size_t oi = (bc * ho + i) * wo + j;
        o[oi] = plane[best];
        arg[oi] = static_cast<std::int64_t>(bc * H * W + best);
      }
    }
  }
  if (!should_record({&input})) return out;
  Tensor argmax = Tensor::from_ids(std::move(arg), out.shape());
  const Shape in_shape = input.shape();
  return record(out, "maxpool2d", {input}, {argmax}, [in_shape](const Node& n, const Tensor& g) {
    Tensor gx = Tensor::zeros(in_shape);
    float* px = gx.data_mut().data();
    auto idx = n.saved[0].ids();
    auto pg = g.data();
    for (std::size_t i = 0; i < pg.size(); ++i) px[idx[i]] += pg[i];
    return std::vector<Tensor>{gx};
  });
}

ConvAccounting conv_accounting(std::size_t in_channels, std::size_t out_channels,
                               std::size_t kernel_h, std::size_t kernel_w, const Shape& input_shape,
                               std::size_t stride, std::size_t padding) {
  const ConvGeometry g =
      geometry(input_shape, out_channels, in_channels, kernel_h, kernel_w, stride, padding);
  ConvAccounting a;
  a.param_count = static_cast<std::uint64_t>(out_channels) * in_channels * kernel_h * kernel_w +
                  out_channels;
  a.macs = static_cast<std::uint64_t>(g.batch) * g.c_out * g.h_out * g.w_out * g.c_in * g.kh * g.kw;
  a.output_shape = {g.batch, g.c_out, g.h_out, g.w_out};
  return a;
}

ConvAccounting conv_accounting(const Conv2dLayer& layer, const Shape& input_shape) {
  return conv_accounting(layer.in_channels(), layer.out_channels(), layer.kernel_h(),
                         layer.kernel_w(), input_shape, layer.stride, layer.padding);
}

}  // namespace tt
