#include "tt/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "tt/autograd.hpp"
#include "tt/counters.hpp"
#include "tt/kernels.hpp"
#include "tt/ops.hpp"
#include "tt/parallel.hpp"

namespace tt {

namespace {

constexpr float kGeluC = 0.7978845608028654f;  // sqrt(2/pi)
constexpr float kGeluA = 0.044715f;

template <class F>
Tensor map(const Tensor& x, F f) {
  Tensor out = Tensor::empty(x.shape());
  const float* px = x.data().data();
  float* po = out.data_mut().data();
  const long n = static_cast<long>(x.numel());
  TT_OMP(parallel for schedule(static) if (n >= kParallelGrain))
  for (long i = 0; i < n; ++i) po[i] = f(px[i]);
  return out;
}

struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    fail(ErrorCode::AxisOutOfRange, std::string(op) + " axis " + std::to_string(axis) +
                                        " for rank " + std::to_string(shape.size()));
  }
  AxisSplit s;
  s.len = shape[axis];
  for (std::size_t d = 0; d < axis; ++d) s.outer *= shape[d];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) s.inner *= shape[d];
  return s;
}

// Writes softmax (log=false) or log-softmax (log=true) of x along the axis.
void softmax_kernel(const float* x, float* y, const AxisSplit& s, bool log) {
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      float m = -std::numeric_limits<float>::infinity();
      for (std::size_t l = 0; l < s.len; ++l) m = std::max(m, x[base + l * s.inner]);
      float z = 0.0f;
      for (std::size_t l = 0; l < s.len; ++l) z += std::exp(x[base + l * s.inner] - m);
      if (log) {
        const float lz = std::log(z);
        for (std::size_t l = 0; l < s.len; ++l) y[base + l * s.inner] = x[base + l * s.inner] - m - lz;
      } else {
        for (std::size_t l = 0; l < s.len; ++l) {
          y[base + l * s.inner] = std::exp(x[base + l * s.inner] - m) / z;
        }
      }
    }
  }
}

}  // namespace

Tensor relu(const Tensor& x) {
  require_float(x, "relu");
  Tensor out = map(x, [](float v) { return v > 0.0f ? v : 0.0f; });
  if (!should_record({&x})) return out;
  Tensor mask = Tensor::empty(x.shape(), DType::Int8);
  auto& m = mask.storage_mut().i8;
  auto px = x.data();
  for (std::size_t i = 0; i < px.size(); ++i) m[i] = px[i] > 0.0f ? 1 : 0;
  return record(out, "relu", {x}, {mask}, [](const Node& n, const Tensor& g) {
    Tensor gx = Tensor::empty(g.shape());
    const auto& m = n.saved[0].storage().i8;
    auto pg = g.data();
    auto po = gx.data_mut();
    for (std::size_t i = 0; i < pg.size(); ++i) po[i] = m[i] ? pg[i] : 0.0f;
    return std::vector<Tensor>{gx};
  });
}

Tensor sigmoid(const Tensor& x) {
  require_float(x, "sigmoid");
  Tensor out = map(x, [](float v) {
    // Branch keeps exp() from overflowing on large |v|.
    if (v >= 0.0f) return 1.0f / (1.0f + std::exp(-v));
    const float e = std::exp(v);
    return e / (1.0f + e);
  });
  if (!should_record({&x})) return out;
  return record(out, "sigmoid", {x}, {out}, [](const Node& n, const Tensor& g) {
    Tensor gx = Tensor::empty(g.shape());
    auto y = n.saved[0].data();
    auto pg = g.data();
    auto po = gx.data_mut();
    for (std::size_t i = 0; i < pg.size(); ++i) po[i] = pg[i] * y[i] * (1.0f - y[i]);
    return std::vector<Tensor>{gx};
  });
}

Tensor tanh(const Tensor& x) {
  require_float(x, "tanh");
  Tensor out = map(x, [](float v) { return std::tanh(v); });
  if (!should_record({&x})) return out;
  return record(out, "tanh", {x}, {out}, [](const Node& n, const Tensor& g) {
    Tensor gx = Tensor::empty(g.shape());
    auto y = n.saved[0].data();
    auto pg = g.data();
    auto po = gx.data_mut();
    for (std::size_t i = 0; i < pg.size(); ++i) po[i] = pg[i] * (1.0f - y[i] * y[i]);
    return std::vector<Tensor>{gx};
  });
}

Tensor gelu(const Tensor& x) {
  require_float(x, "gelu");
  Tensor out = map(x, [](float v) {
    return 0.5f * v * (1.0f + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  });
  if (!should_record({&x})) return out;
  return record(out, "gelu", {x}, {x}, [](const Node& n, const Tensor& g) {
    Tensor gx = Tensor::empty(g.shape());
    auto px = n.saved[0].data();
    auto pg = g.data();
    auto po = gx.data_mut();
    for (std::size_t i = 0; i < pg.size(); ++i) {
      const float v = px[i];
      const float t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
      const float du = kGeluC * (1.0f + 3.0f * kGeluA * v * v);
      po[i] = pg[i] * (0.5f * (1.0f + t) + 0.5f * v * (1.0f - t * t) * du);
    }
    return std::vector<Tensor>{gx};
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  require_float(x, "softmax");
  const AxisSplit s = split_axis(x.shape(), axis, "softmax");
  Tensor out = Tensor::empty(x.shape());
  softmax_kernel(x.data().data(), out.data_mut().data(), s, false);
  if (!should_record({&x})) return out;
  return record(out, "softmax", {x}, {out}, [s](const Node& n, const Tensor& g) {
    Tensor gx = Tensor::empty(g.shape());
    const float* y = n.saved[0].data().data();
    const float* pg = g.data().data();
    float* po = gx.data_mut().data();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.len * s.inner + i;
        float dot = 0.0f;
        for (std::size_t l = 0; l < s.len; ++l) dot += pg[base + l * s.inner] * y[base + l * s.inner];
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t k = base + l * s.inner;
          po[k] = y[k] * (pg[k] - dot);
        }
      }
    }
    return std::vector<Tensor>{gx};
  });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  require_float(x, "log_softmax");
  const AxisSplit s = split_axis(x.shape(), axis, "log_softmax");
  Tensor out = Tensor::empty(x.shape());
  softmax_kernel(x.data().data(), out.data_mut().data(), s, true);
  if (!should_record({&x})) return out;
  return record(out, "log_softmax", {x}, {out}, [s](const Node& n, const Tensor& g) {
    Tensor gx = Tensor::empty(g.shape());
    const float* y = n.saved[0].data().data();
    const float* pg = g.data().data();
    float* po = gx.data_mut().data();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.len * s.inner + i;
        float total = 0.0f;
        for (std::size_t l = 0; l < s.len; ++l) total += pg[base + l * s.inner];
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t k = base + l * s.inner;
          po[k] = pg[k] - std::exp(y[k]) * total;
        }
      }
    }
    return std::vector<Tensor>{gx};
  });
}

Tensor activation(Activation kind, const Tensor& x, std::size_t axis) {
  switch (kind) {
    case Activation::ReLU: return relu(x);
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Tanh: return tanh(x);
    case Activation::GELU: return gelu(x);
    case Activation::Softmax: return softmax(x, axis);
  }
  return x;
}

double xavier_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Tensor xavier_init(std::size_t fan_in, std::size_t fan_out, SplitMix64& rng) {
  if (fan_in == 0 || fan_out == 0) fail(ErrorCode::InvalidArgument, "xavier_init needs positive fans");
  const double b = xavier_bound(fan_in, fan_out);
  std::vector<float> w(fan_in * fan_out);
  for (auto& v : w) v = static_cast<float>(rng.uniform(-b, b));
  return Tensor::from(std::move(w), {fan_out, fan_in});
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_float(x, "linear");
  const std::size_t out_f = weight.dim(0);
  const std::size_t in_f = weight.dim(1);
  if (x.rank() == 0 || x.shape().back() != in_f) {
    fail(ErrorCode::ShapeMismatch, "linear expects trailing dimension " + std::to_string(in_f) +
                                       ", got " + shape_str(x.shape()));
  }
  if (bias.defined() && bias.numel() != out_f) {
    fail(ErrorCode::ShapeMismatch, "bias " + shape_str(bias.shape()) + " for " +
                                       std::to_string(out_f) + " outputs");
  }
  const std::size_t rows = x.numel() / in_f;
  Shape out_shape = x.shape();
  out_shape.back() = out_f;
  Tensor out = Tensor::empty(out_shape);
  {
    std::vector<float> wt(in_f * out_f);
    kernels::transpose2d(out_f, in_f, weight.data().data(), wt.data());
    float* po = out.data_mut().data();
    if (bias.defined()) {
      const float* pb = bias.data().data();
      for (std::size_t r = 0; r < rows; ++r) std::copy(pb, pb + out_f, po + r * out_f);
    }
    kernels::gemm(rows, out_f, in_f, x.data().data(), wt.data(), po, bias.defined());
  }
  op_counters().macs += static_cast<std::uint64_t>(rows) * in_f * out_f;
  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  if (!should_record(inputs)) return out;
  return record(out, "linear", inputs, {x, weight},
                [rows, in_f, out_f](const Node& n, const Tensor& g) {
                  const Tensor& xs = n.saved[0];
                  const Tensor& w = n.saved[1];
                  std::vector<Tensor> grads(n.inputs.size());
                  const float* pg = g.data().data();
                  if (n.inputs[0].active()) {
                    Tensor gx = Tensor::empty(xs.shape());
                    kernels::gemm(rows, in_f, out_f, pg, w.data().data(), gx.data_mut().data());
                    grads[0] = gx;
                  }
                  if (n.inputs[1].active()) {
                    std::vector<float> gt(out_f * rows);
                    kernels::transpose2d(rows, out_f, pg, gt.data());
                    Tensor gw = Tensor::empty({out_f, in_f});
                    kernels::gemm(out_f, in_f, rows, gt.data(), xs.data().data(),
                                  gw.data_mut().data());
                    grads[1] = gw;
                  }
                  if (grads.size() > 2 && n.inputs[2].active()) {
                    Tensor gb = Tensor::zeros({out_f});
                    float* pb = gb.data_mut().data();
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (std::size_t j = 0; j < out_f; ++j) pb[j] += pg[r * out_f + j];
                    }
                    grads[2] = gb;
                  }
                  return grads;
                });
}

LinearLayer::LinearLayer(std::size_t in, std::size_t out, SplitMix64& rng)
    : weight(xavier_init(in, out, rng)), bias(Tensor::zeros({out})), in_features(in),
      out_features(out) {
  if (grad_enabled()) {
    weight.set_requires_grad(true);
    bias.set_requires_grad(true);
  }
}

LinearLayer::LinearLayer(Tensor w, Tensor b)
    : weight(std::move(w)), bias(std::move(b)), in_features(weight.dim(1)),
      out_features(weight.dim(0)) {}

Tensor cross_entropy_loss(const Tensor& logits, const Tensor& targets) {
  require_float(logits, "cross_entropy_loss");
  if (targets.dtype() != DType::Int64) {
    fail(ErrorCode::DTypeError, "cross_entropy_loss targets must be int64");
  }
  if (logits.rank() < 1) fail(ErrorCode::ShapeMismatch, "logits need a class axis");
  const std::size_t classes = logits.shape().back();
  const std::size_t rows = classes ? logits.numel() / classes : 0;
  if (targets.numel() != rows) {
    fail(ErrorCode::ShapeMismatch, "logits " + shape_str(logits.shape()) + " vs targets " +
                                       shape_str(targets.shape()));
  }
  auto t = targets.ids();
  for (std::size_t r = 0; r < rows; ++r) {
    if (t[r] < 0 || static_cast<std::size_t>(t[r]) >= classes) {
      fail(ErrorCode::TargetOutOfRange, "target " + std::to_string(t[r]) + " with " +
                                            std::to_string(classes) + " classes");
    }
  }
  Tensor logp = Tensor::empty({rows, classes});
  softmax_kernel(logits.data().data(), logp.data_mut().data(), AxisSplit{rows, classes, 1}, true);
  const float* lp = logp.data().data();
  float total = 0.0f;
  for (std::size_t r = 0; r < rows; ++r) total -= lp[r * classes + static_cast<std::size_t>(t[r])];
  Tensor out = Tensor::scalar(total / static_cast<float>(rows));
  if (!should_record({&logits})) return out;
  const Shape shape = logits.shape();
  return record(out, "cross_entropy", {logits}, {logp, targets},
                [rows, classes, shape](const Node& n, const Tensor& g) {
                  const float scale = g.item() / static_cast<float>(rows);
                  Tensor gx = Tensor::empty(shape);
                  const float* lp = n.saved[0].data().data();
                  auto t = n.saved[1].ids();
                  float* po = gx.data_mut().data();
                  for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t c = 0; c < classes; ++c) {
                      po[r * classes + c] = std::exp(lp[r * classes + c]) * scale;
                    }
                    po[r * classes + static_cast<std::size_t>(t[r])] -= scale;
                  }
                  return std::vector<Tensor>{gx};
                });
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  require_float(pred, "mse_loss");
  require_float(target, "mse_loss");
  if (pred.shape() != target.shape()) {
    fail(ErrorCode::ShapeMismatch,
         "mse_loss " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  }
  auto p = pred.data();
  auto q = target.data();
  float total = 0.0f;
  for (std::size_t i = 0; i < p.size(); ++i) total += (p[i] - q[i]) * (p[i] - q[i]);
  const std::size_t count = p.size();
  Tensor out = Tensor::scalar(total / static_cast<float>(count));
  if (!should_record({&pred, &target})) return out;
  return record(out, "mse", {pred, target}, {pred, target}, [count](const Node& n, const Tensor& g) {
    const float scale = 2.0f * g.item() / static_cast<float>(count);
    Tensor diff = n.saved[0] - n.saved[1];
    Tensor gp = mul_scalar(diff, scale);
    return std::vector<Tensor>{gp, -gp};
  });
}

}  // namespace tt
