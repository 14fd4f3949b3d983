#include "tt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tt/counters.hpp"
#include "tt/kernels.hpp"
#include "tt/parallel.hpp"

namespace tt {

namespace {

thread_local OpCounters g_counters;

std::vector<std::size_t> row_major_strides(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

// Strides of `in` addressed by an index of `out`; broadcast dims get 0.
std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  const auto in_strides = row_major_strides(in);
  const std::size_t pad = out.size() - in.size();
  for (std::size_t d = 0; d < in.size(); ++d) {
    strides[pad + d] = in[d] == 1 ? 0 : in_strides[d];
  }
  return strides;
}

// Visits every element of `out_shape` in row-major order, calling
// f(out_offset, a_offset, b_offset, inner_count, a_inner_stride, b_inner_stride)
// once per innermost row.
template <class F>
void for_each_row(const Shape& out_shape, const std::vector<std::size_t>& sa,
                  const std::vector<std::size_t>& sb, F&& f) {
  const std::size_t rank = out_shape.size();
  if (rank == 0) {
    f(0, 0, 0, 1, 0, 0);
    return;
  }
  const std::size_t inner = out_shape[rank - 1];
  const std::size_t total = shape_numel(out_shape);
  if (inner == 0 || total == 0) return;
  const std::size_t outer = total / inner;
  std::vector<std::size_t> idx(rank - 1, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t o = 0; o < outer; ++o) {
    f(o * inner, oa, ob, inner, sa[rank - 1], sb[rank - 1]);
    for (std::size_t d = rank - 1; d-- > 0;) {
      ++idx[d];
      oa += sa[d];
      ob += sb[d];
      if (idx[d] < out_shape[d]) break;
      oa -= sa[d] * idx[d];
      ob -= sb[d] * idx[d];
      idx[d] = 0;
    }
  }
}

template <class F>
Tensor binary_kernel(const Tensor& a, const Tensor& b, F f) {
  const Shape out_shape = broadcast_shapes(a.shape(), b.shape());
  Tensor out = Tensor::empty(out_shape);
  auto o = out.data_mut().data();
  const float* pa = a.data().data();
  const float* pb = b.data().data();
  if (a.shape() == b.shape()) {
    const long n = static_cast<long>(out.numel());
    TT_OMP(parallel for schedule(static) if (n >= kParallelGrain))
    for (long i = 0; i < n; ++i) o[i] = f(pa[i], pb[i]);
    return out;
  }
  const auto sa = broadcast_strides(a.shape(), out_shape);
  const auto sb = broadcast_strides(b.shape(), out_shape);
  for_each_row(out_shape, sa, sb,
               [&](std::size_t oo, std::size_t oa, std::size_t ob, std::size_t n, std::size_t ia,
                   std::size_t ib) {
                 for (std::size_t j = 0; j < n; ++j) o[oo + j] = f(pa[oa + j * ia], pb[ob + j * ib]);
               });
  return out;
}

template <class F>
Tensor unary_kernel(const Tensor& a, F f) {
  Tensor out = Tensor::empty(a.shape());
  auto o = out.data_mut().data();
  const float* pa = a.data().data();
  const long n = static_cast<long>(a.numel());
  TT_OMP(parallel for schedule(static) if (n >= kParallelGrain))
  for (long i = 0; i < n; ++i) o[i] = f(pa[i]);
  return out;
}

}  // namespace

OpCounters& op_counters() { return g_counters; }
void reset_op_counters() { g_counters = OpCounters{}; }

Tensor sum_to(const Tensor& g, const Shape& shape) {
  if (g.shape() == shape) return g;
  Tensor out = Tensor::zeros(shape);
  auto o = out.data_mut().data();
  const float* pg = g.data().data();
  const auto so = broadcast_strides(shape, g.shape());
  const std::vector<std::size_t> unit = row_major_strides(g.shape());
  std::vector<std::size_t> sg(g.rank(), 0);
  if (!sg.empty()) sg = unit;
  for_each_row(g.shape(), sg, so,
               [&](std::size_t, std::size_t og, std::size_t oo, std::size_t n, std::size_t ig,
                   std::size_t io) {
                 for (std::size_t j = 0; j < n; ++j) o[oo + j * io] += pg[og + j * ig];
               });
  return out;
}

Tensor expand(const Tensor& t, const Shape& shape) {
  if (t.shape() == shape) return t;
  broadcast_shapes(t.shape(), shape);
  Tensor out = Tensor::empty(shape);
  auto o = out.data_mut().data();
  const float* pt = t.data().data();
  const auto st = broadcast_strides(t.shape(), shape);
  for_each_row(shape, st, st,
               [&](std::size_t oo, std::size_t ot, std::size_t, std::size_t n, std::size_t it,
                   std::size_t) {
                 for (std::size_t j = 0; j < n; ++j) o[oo + j] = pt[ot + j * it];
               });
  return out;
}

Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b) {
  require_float(a, "elementwise");
  require_float(b, "elementwise");
  Tensor out;
  switch (op) {
    case BinaryOp::Add: out = binary_kernel(a, b, [](float x, float y) { return x + y; }); break;
    case BinaryOp::Sub: out = binary_kernel(a, b, [](float x, float y) { return x - y; }); break;
    case BinaryOp::Mul: out = binary_kernel(a, b, [](float x, float y) { return x * y; }); break;
    case BinaryOp::Div: out = binary_kernel(a, b, [](float x, float y) { return x / y; }); break;
  }
  if (!should_record({&a, &b})) return out;

  const Shape sa = a.shape();
  const Shape sb = b.shape();
  switch (op) {
    case BinaryOp::Add:
      return record(out, "add", {a, b}, {}, [sa, sb](const Node&, const Tensor& g) {
        return std::vector<Tensor>{sum_to(g, sa), sum_to(g, sb)};
      });
    case BinaryOp::Sub:
      return record(out, "sub", {a, b}, {}, [sa, sb](const Node&, const Tensor& g) {
        return std::vector<Tensor>{sum_to(g, sa), sum_to(-g, sb)};
      });
    case BinaryOp::Mul:
      return record(out, "mul", {a, b}, {a, b}, [sa, sb](const Node& n, const Tensor& g) {
        const Tensor& x = n.saved[0];
        const Tensor& y = n.saved[1];
        return std::vector<Tensor>{sum_to(g * y, sa), sum_to(g * x, sb)};
      });
    case BinaryOp::Div:
      return record(out, "div", {a, b}, {a, b}, [sa, sb](const Node& n, const Tensor& g) {
        const Tensor& x = n.saved[0];
        const Tensor& y = n.saved[1];
        Tensor gx = sum_to(g / y, sa);
        Tensor gy = sum_to(-(g * x / (y * y)), sb);
        return std::vector<Tensor>{gx, gy};
      });
  }
  return out;
}

Tensor operator+(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::Add, a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::Sub, a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::Mul, a, b); }
Tensor operator/(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::Div, a, b); }

Tensor operator-(const Tensor& a) { return mul_scalar(a, -1.0f); }

Tensor add_scalar(const Tensor& a, float s) {
  require_float(a, "add_scalar");
  Tensor out = unary_kernel(a, [s](float x) { return x + s; });
  return record(out, "add_scalar", {a}, {},
                [](const Node&, const Tensor& g) { return std::vector<Tensor>{g}; });
}

Tensor mul_scalar(const Tensor& a, float s) {
  require_float(a, "mul_scalar");
  Tensor out = unary_kernel(a, [s](float x) { return x * s; });
  return record(out, "mul_scalar", {a}, {}, [s](const Node&, const Tensor& g) {
    return std::vector<Tensor>{mul_scalar(g, s)};
  });
}

namespace {

[[noreturn]] void matmul_mismatch(const Tensor& a, const Tensor& b) {
  fail(ErrorCode::ShapeMismatch, "Shape mismatch: " + shape_str(a.shape()) + " @ " +
                                     shape_str(b.shape()));
}

// Batched product of identical leading dims; batch = product of leading dims.
Tensor bmm_raw(const Tensor& a, const Tensor& b, std::size_t batch, std::size_t m, std::size_t k,
               std::size_t n, Shape out_shape) {
  Tensor out = Tensor::empty(out_shape);
  const float* pa = a.data().data();
  const float* pb = b.data().data();
  float* po = out.data_mut().data();
  for (std::size_t i = 0; i < batch; ++i) {
    kernels::gemm(m, n, k, pa + i * m * k, pb + i * k * n, po + i * m * n);
  }
  return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_float(a, "matmul");
  require_float(b, "matmul");
  if (a.rank() < 2 || b.rank() < 2) matmul_mismatch(a, b);
  const std::size_t k = a.shape().back();
  const std::size_t m = a.shape()[a.rank() - 2];
  const std::size_t n = b.shape().back();
  if (b.shape()[b.rank() - 2] != k) matmul_mismatch(a, b);

  if (b.rank() == 2) {
    // Fold any leading batch of `a` into rows.
    const std::size_t rows = a.numel() / std::max<std::size_t>(k, 1);
    Shape out_shape = a.shape();
    out_shape.back() = n;
    Tensor out = Tensor::empty(out_shape);
    kernels::gemm(rows, n, k, a.data().data(), b.data().data(), out.data_mut().data());
    op_counters().macs += static_cast<std::uint64_t>(rows) * k * n;
    if (!should_record({&a, &b})) return out;
    return record(out, "matmul", {a, b}, {a, b}, [rows, k, n](const Node& node, const Tensor& g) {
      const Tensor& x = node.saved[0];
      const Tensor& w = node.saved[1];
      std::vector<Tensor> grads(2);
      if (node.inputs[0].active()) {
        Tensor wt = Tensor::empty({n, k});
        kernels::transpose2d(k, n, w.data().data(), wt.data_mut().data());
        Tensor gx = Tensor::empty(x.shape());
        kernels::gemm(rows, k, n, g.data().data(), wt.data().data(), gx.data_mut().data());
        grads[0] = gx;
      }
      if (node.inputs[1].active()) {
        Tensor xt = Tensor::empty({k, rows});
        kernels::transpose2d(rows, k, x.data().data(), xt.data_mut().data());
        Tensor gw = Tensor::empty({k, n});
        kernels::gemm(k, n, rows, xt.data().data(), g.data().data(), gw.data_mut().data());
        grads[1] = gw;
      }
      return grads;
    });
  }

  if (a.rank() != b.rank() ||
      !std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin())) {
    matmul_mismatch(a, b);
  }
  const std::size_t batch = a.numel() / std::max<std::size_t>(m * k, 1);
  Shape out_shape = a.shape();
  out_shape.back() = n;
  Tensor out = bmm_raw(a, b, batch, m, k, n, out_shape);
  op_counters().macs += static_cast<std::uint64_t>(batch) * m * k * n;
  if (!should_record({&a, &b})) return out;
  return record(out, "bmm", {a, b}, {a, b}, [batch, m, k, n](const Node& node, const Tensor& g) {
    const Tensor& x = node.saved[0];
    const Tensor& w = node.saved[1];
    std::vector<Tensor> grads(2);
    if (node.inputs[0].active()) {
      Tensor gx = Tensor::empty(x.shape());
      std::vector<float> wt(k * n);
      for (std::size_t i = 0; i < batch; ++i) {
        kernels::transpose2d(k, n, w.data().data() + i * k * n, wt.data());
        kernels::gemm(m, k, n, g.data().data() + i * m * n, wt.data(),
                      gx.data_mut().data() + i * m * k);
      }
      grads[0] = gx;
    }
    if (node.inputs[1].active()) {
      Tensor gw = Tensor::empty(w.shape());
      std::vector<float> xt(m * k);
      for (std::size_t i = 0; i < batch; ++i) {
        kernels::transpose2d(m, k, x.data().data() + i * m * k, xt.data());
        kernels::gemm(k, n, m, xt.data(), g.data().data() + i * m * n,
                      gw.data_mut().data() + i * k * n);
      }
      grads[1] = gw;
    }
    return grads;
  });
}

Tensor reduce(ReduceOp op, const Tensor& t, std::optional<std::size_t> axis) {
  require_float(t, "reduce");
  const float* pt = t.data().data();
  if (!axis) {
    const std::size_t n = t.numel();
    float acc = 0.0f;
    std::size_t arg = 0;
    if (op == ReduceOp::Max) {
      acc = n ? pt[0] : -std::numeric_limits<float>::infinity();
      for (std::size_t i = 1; i < n; ++i) {
        if (pt[i] > acc) {
          acc = pt[i];
          arg = i;
        }
      }
    } else {
      // Double accumulator: float sums of long vectors drift by O(n u).
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += pt[i];
      if (op == ReduceOp::Mean) total /= static_cast<double>(n);
      acc = static_cast<float>(total);
    }
    Tensor out = Tensor::scalar(acc);
    const Shape shape = t.shape();
    switch (op) {
      case ReduceOp::Sum:
        return record(out, "sum", {t}, {}, [shape](const Node&, const Tensor& g) {
          return std::vector<Tensor>{Tensor::full(shape, g.item())};
        });
      case ReduceOp::Mean:
        return record(out, "mean", {t}, {}, [shape, n](const Node&, const Tensor& g) {
          return std::vector<Tensor>{Tensor::full(shape, g.item() / static_cast<float>(n))};
        });
      case ReduceOp::Max:
        return record(out, "max", {t}, {}, [shape, arg](const Node&, const Tensor& g) {
          Tensor gx = Tensor::zeros(shape);
          gx.data_mut()[arg] = g.item();
          return std::vector<Tensor>{gx};
        });
    }
    return out;
  }

  const std::size_t ax = *axis;
  if (ax >= t.rank()) {
    fail(ErrorCode::AxisOutOfRange,
         "axis " + std::to_string(ax) + " for tensor of rank " + std::to_string(t.rank()));
  }
  const Shape shape = t.shape();
  const std::size_t len = shape[ax];
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < ax; ++d) outer *= shape[d];
  for (std::size_t d = ax + 1; d < shape.size(); ++d) inner *= shape[d];
  Shape out_shape = shape;
  out_shape.erase(out_shape.begin() + static_cast<long>(ax));
  Tensor out = Tensor::empty(out_shape);
  float* po = out.data_mut().data();
  std::vector<std::size_t> args;
  if (op == ReduceOp::Max) args.assign(outer * inner, 0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const float* base = pt + o * len * inner + i;
      float acc;
      if (op == ReduceOp::Max) {
        acc = len ? base[0] : -std::numeric_limits<float>::infinity();
        std::size_t arg = 0;
        for (std::size_t l = 1; l < len; ++l) {
          if (base[l * inner] > acc) {
            acc = base[l * inner];
            arg = l;
          }
        }
        args[o * inner + i] = arg;
      } else {
        double total = 0.0;
        for (std::size_t l = 0; l < len; ++l) total += base[l * inner];
        if (op == ReduceOp::Mean) total /= static_cast<double>(len);
        acc = static_cast<float>(total);
      }
      po[o * inner + i] = acc;
    }
  }
  if (!should_record({&t})) return out;

  Shape keep = shape;
  keep[ax] = 1;
  switch (op) {
    case ReduceOp::Sum:
      return record(out, "sum_axis", {t}, {}, [shape, keep](const Node&, const Tensor& g) {
        return std::vector<Tensor>{expand(reshape(g, keep), shape)};
      });
    case ReduceOp::Mean:
      return record(out, "mean_axis", {t}, {}, [shape, keep, len](const Node&, const Tensor& g) {
        return std::vector<Tensor>{
            mul_scalar(expand(reshape(g, keep), shape), 1.0f / static_cast<float>(len))};
      });
    case ReduceOp::Max:
      return record(out, "max_axis", {t}, {},
                    [shape, args = std::move(args), outer, inner, len](const Node&,
                                                                       const Tensor& g) {
                      Tensor gx = Tensor::zeros(shape);
                      float* pg = gx.data_mut().data();
                      const float* gg = g.data().data();
                      for (std::size_t o = 0; o < outer; ++o) {
                        for (std::size_t i = 0; i < inner; ++i) {
                          pg[o * len * inner + args[o * inner + i] * inner + i] =
                              gg[o * inner + i];
                        }
                      }
                      return std::vector<Tensor>{gx};
                    });
  }
  return out;
}

Tensor reshape(const Tensor& t, const Shape& shape) {
  if (shape_numel(shape) != t.numel()) {
    fail(ErrorCode::ShapeMismatch,
         "cannot reshape " + shape_str(t.shape()) + " to " + shape_str(shape));
  }
  Tensor out = t.clone();
  out.impl()->shape = shape;
  const Shape original = t.shape();
  return record(out, "reshape", {t}, {}, [original](const Node&, const Tensor& g) {
    return std::vector<Tensor>{reshape(g, original)};
  });
}

std::vector<std::size_t> inverse_permutation(const std::vector<std::size_t>& perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

Tensor permute(const Tensor& t, const std::vector<std::size_t>& perm) {
  const std::size_t rank = t.rank();
  if (perm.size() != rank) fail(ErrorCode::InvalidPermutation, "permutation rank mismatch");
  std::vector<bool> seen(rank, false);
  for (auto p : perm) {
    if (p >= rank || seen[p]) fail(ErrorCode::InvalidPermutation, "not a permutation of axes");
    seen[p] = true;
  }
  Shape out_shape(rank);
  for (std::size_t d = 0; d < rank; ++d) out_shape[d] = t.shape()[perm[d]];
  Tensor out = Tensor::empty(out_shape, t.dtype());
  const auto in_strides = row_major_strides(t.shape());
  std::vector<std::size_t> src(rank);
  for (std::size_t d = 0; d < rank; ++d) src[d] = in_strides[perm[d]];
  if (t.dtype() == DType::Float32) {
    const float* pt = t.data().data();
    float* po = out.data_mut().data();
    for_each_row(out_shape, src, src,
                 [&](std::size_t oo, std::size_t os, std::size_t, std::size_t n, std::size_t is,
                     std::size_t) {
                   for (std::size_t j = 0; j < n; ++j) po[oo + j] = pt[os + j * is];
                 });
  } else {
    // Integer tensors are permuted bitwise (no graph).
    auto& so = out.storage_mut();
    const auto& st = t.storage();
    for_each_row(out_shape, src, src,
                 [&](std::size_t oo, std::size_t os, std::size_t, std::size_t n, std::size_t is,
                     std::size_t) {
                   for (std::size_t j = 0; j < n; ++j) {
                     if (t.dtype() == DType::Int8) {
                       so.i8[oo + j] = st.i8[os + j * is];
                     } else {
                       so.i64[oo + j] = st.i64[os + j * is];
                     }
                   }
                 });
    return out;
  }
  return record(out, "permute", {t}, {}, [perm](const Node&, const Tensor& g) {
    return std::vector<Tensor>{permute(g, inverse_permutation(perm))};
  });
}

Tensor transpose(const Tensor& t) {
  if (t.rank() < 2) fail(ErrorCode::InvalidPermutation, "transpose needs rank >= 2");
  std::vector<std::size_t> perm(t.rank());
  std::iota(perm.begin(), perm.end(), 0);
  std::swap(perm[t.rank() - 1], perm[t.rank() - 2]);
  return permute(t, perm);
}

Tensor exp(const Tensor& t) {
  require_float(t, "exp");
  Tensor out = unary_kernel(t, [](float x) { return std::exp(x); });
  if (!should_record({&t})) return out;
  return record(out, "exp", {t}, {out}, [](const Node& n, const Tensor& g) {
    return std::vector<Tensor>{g * n.saved[0]};
  });
}

Tensor log(const Tensor& t) {
  require_float(t, "log");
  Tensor out = unary_kernel(t, [](float x) { return std::log(x); });
  return record(out, "log", {t}, {t}, [](const Node& n, const Tensor& g) {
    return std::vector<Tensor>{g / n.saved[0]};
  });
}

Tensor argmax(const Tensor& t, std::size_t axis) {
  require_float(t, "argmax");
  if (axis >= t.rank()) fail(ErrorCode::AxisOutOfRange, "argmax axis out of range");
  const Shape& shape = t.shape();
  const std::size_t len = shape[axis];
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= shape[d];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
  Shape out_shape = shape;
  out_shape.erase(out_shape.begin() + static_cast<long>(axis));
  std::vector<std::int64_t> ids(outer * inner, 0);
  const float* pt = t.data().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const float* base = pt + o * len * inner + i;
      std::size_t best = 0;
      for (std::size_t l = 1; l < len; ++l) {
        if (base[l * inner] > base[best * inner]) best = l;
      }
      ids[o * inner + i] = static_cast<std::int64_t>(best);
    }
  }
  return Tensor::from_ids(std::move(ids), out_shape);
}

}  // namespace tt
