#include "tt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tt/autograd.hpp"

namespace tt {

namespace {

thread_local MemoryStats g_memory;

}  // namespace

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DTypeOverflow: return "DTypeOverflow";
    case ErrorCode::DTypeError: return "DTypeError";
    case ErrorCode::BroadcastError: return "BroadcastError";
    case ErrorCode::AxisOutOfRange: return "AxisOutOfRange";
    case ErrorCode::InvalidPermutation: return "InvalidPermutation";
    case ErrorCode::GradModeOff: return "GradModeOff";
    case ErrorCode::BackwardFromNonScalar: return "BackwardFromNonScalar";
    case ErrorCode::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::EmptyParamList: return "EmptyParamList";
    case ErrorCode::MissingGrad: return "MissingGrad";
    case ErrorCode::TargetOutOfRange: return "TargetOutOfRange";
    case ErrorCode::StepOutOfRange: return "StepOutOfRange";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::MissingTensor: return "MissingTensor";
    case ErrorCode::KernelTooLarge: return "KernelTooLarge";
    case ErrorCode::WindowTooLarge: return "WindowTooLarge";
    case ErrorCode::VocabTooSmall: return "VocabTooSmall";
    case ErrorCode::InvalidTokenId: return "InvalidTokenId";
    case ErrorCode::TokenIdOutOfRange: return "TokenIdOutOfRange";
    case ErrorCode::OddDimension: return "OddDimension";
    case ErrorCode::CacheOverflow: return "CacheOverflow";
    case ErrorCode::SequenceTooLong: return "SequenceTooLong";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::LevelMismatch: return "LevelMismatch";
    case ErrorCode::MilestoneFailed: return "MilestoneFailed";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Error";
}

std::string_view dtype_name(DType dtype) {
  switch (dtype) {
    case DType::Float32: return "float32";
    case DType::Int8: return "int8";
    case DType::Int64: return "int64";
  }
  return "unknown";
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  if (shape.size() == 1) os << ',';
  os << ')';
  return os.str();
}

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    // i counts from the right.
    const std::size_t da = i < a.size() ? a[a.size() - 1 - i] : 1;
    const std::size_t db = i < b.size() ? b[b.size() - 1 - i] : 1;
    if (da != db && da != 1 && db != 1) {
      std::ostringstream os;
      os << "cannot broadcast " << shape_str(a) << " with " << shape_str(b) << " at dimension "
         << (rank - 1 - i) << " (" << da << " vs " << db << ")";
      fail(ErrorCode::BroadcastError, os.str());
    }
    out[rank - 1 - i] = std::max(da, db);
  }
  return out;
}

const MemoryStats& memory_stats() { return g_memory; }

void reset_peak_memory() { g_memory.peak_bytes = g_memory.live_bytes; }

Storage::Storage(DType dtype, std::size_t count) : dtype_(dtype), count_(count) {
  switch (dtype) {
    case DType::Float32: f32.assign(count, 0.0f); break;
    case DType::Int8: i8.assign(count, 0); break;
    case DType::Int64: i64.assign(count, 0); break;
  }
  const auto b = static_cast<std::int64_t>(bytes());
  g_memory.live_bytes += b;
  g_memory.allocated_bytes += b;
  g_memory.live_buffers += 1;
  g_memory.peak_bytes = std::max(g_memory.peak_bytes, g_memory.live_bytes);
}

Storage::~Storage() {
  g_memory.live_bytes -= static_cast<std::int64_t>(bytes());
  g_memory.live_buffers -= 1;
}

Tensor Tensor::empty(const Shape& shape, DType dtype) {
  auto impl = std::make_shared<TensorImpl>();
  impl->storage = std::make_shared<Storage>(dtype, shape_numel(shape));
  impl->shape = shape;
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(const Shape& shape) { return empty(shape, DType::Float32); }

Tensor Tensor::ones(const Shape& shape) { return full(shape, 1.0f); }

Tensor Tensor::full(const Shape& shape, float value) {
  Tensor t = empty(shape, DType::Float32);
  std::fill(t.impl_->storage->f32.begin(), t.impl_->storage->f32.end(), value);
  return t;
}

Tensor Tensor::scalar(float value) { return full({}, value); }

Tensor Tensor::from(std::vector<float> values, const Shape& shape, bool requires_grad) {
  if (values.size() != shape_numel(shape)) {
    fail(ErrorCode::ShapeMismatch, std::to_string(values.size()) + " values for shape " +
                                       shape_str(shape));
  }
  Tensor t = empty(shape, DType::Float32);
  t.impl_->storage->f32 = std::move(values);
  if (requires_grad) t.set_requires_grad(true);
  return t;
}

Tensor Tensor::from_ids(std::vector<std::int64_t> ids, const Shape& shape) {
  if (ids.size() != shape_numel(shape)) {
    fail(ErrorCode::ShapeMismatch,
         std::to_string(ids.size()) + " ids for shape " + shape_str(shape));
  }
  Tensor t = empty(shape, DType::Int64);
  t.impl_->storage->i64 = std::move(ids);
  return t;
}

Tensor Tensor::from_int8(std::vector<std::int8_t> values, const Shape& shape) {
  if (values.size() != shape_numel(shape)) {
    fail(ErrorCode::ShapeMismatch,
         std::to_string(values.size()) + " values for shape " + shape_str(shape));
  }
  Tensor t = empty(shape, DType::Int8);
  t.impl_->storage->i8 = std::move(values);
  return t;
}

std::span<const float> Tensor::data() const {
  if (dtype() != DType::Float32) fail(ErrorCode::DTypeError, "tensor is not float32");
  return impl_->storage->f32;
}

std::span<float> Tensor::data_mut() {
  if (dtype() != DType::Float32) fail(ErrorCode::DTypeError, "tensor is not float32");
  return impl_->storage->f32;
}

std::span<const std::int8_t> Tensor::int8_data() const {
  if (dtype() != DType::Int8) fail(ErrorCode::DTypeError, "tensor is not int8");
  return impl_->storage->i8;
}

std::span<const std::int64_t> Tensor::ids() const {
  if (dtype() != DType::Int64) fail(ErrorCode::DTypeError, "tensor is not int64");
  return impl_->storage->i64;
}

std::span<std::int64_t> Tensor::ids_mut() {
  if (dtype() != DType::Int64) fail(ErrorCode::DTypeError, "tensor is not int64");
  return impl_->storage->i64;
}

float Tensor::item() const {
  if (numel() != 1) {
    fail(ErrorCode::ShapeMismatch, "item() on tensor of shape " + shape_str(shape()));
  }
  switch (dtype()) {
    case DType::Float32: return impl_->storage->f32[0];
    case DType::Int8: return impl_->storage->i8[0];
    case DType::Int64: return static_cast<float>(impl_->storage->i64[0]);
  }
  return 0.0f;
}

float Tensor::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != rank()) {
    fail(ErrorCode::ShapeMismatch, "index rank does not match " + shape_str(shape()));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= shape()[axis]) fail(ErrorCode::IndexOutOfRange, "index out of range");
    flat = flat * shape()[axis] + i;
    ++axis;
  }
  switch (dtype()) {
    case DType::Float32: return impl_->storage->f32[flat];
    case DType::Int8: return impl_->storage->i8[flat];
    case DType::Int64: return static_cast<float>(impl_->storage->i64[flat]);
  }
  return 0.0f;
}

std::vector<float> Tensor::to_vector() const {
  auto d = data();
  return {d.begin(), d.end()};
}

Tensor& Tensor::set_requires_grad(bool flag) {
  if (flag && !grad_enabled()) {
    fail(ErrorCode::GradModeOff, "requires_grad needs enable_autograd() first");
  }
  if (flag && dtype() != DType::Float32) {
    fail(ErrorCode::DTypeError, "only float32 tensors can require grad");
  }
  impl_->requires_grad = flag;
  return *this;
}

std::optional<Tensor> Tensor::grad() const {
  if (!impl_->grad) return std::nullopt;
  return Tensor(impl_->grad);
}

void Tensor::accumulate_grad(const Tensor& g) {
  if (g.shape() != shape()) {
    fail(ErrorCode::ShapeMismatch,
         "gradient " + shape_str(g.shape()) + " for tensor " + shape_str(shape()));
  }
  if (!impl_->grad) {
    impl_->grad = g.clone().impl_;
    return;
  }
  auto dst = impl_->grad->storage->f32.data();
  auto src = g.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->storage = impl_->storage;
  impl->shape = impl_->shape;
  return Tensor(std::move(impl));
}

Tensor Tensor::clone() const {
  Tensor t = empty(shape(), dtype());
  t.impl_->storage->f32 = impl_->storage->f32;
  t.impl_->storage->i8 = impl_->storage->i8;
  t.impl_->storage->i64 = impl_->storage->i64;
  return t;
}

Tensor tensor_new(std::span<const double> values, const Shape& shape, DType dtype,
                  bool requires_grad) {
  if (values.size() != shape_numel(shape)) {
    fail(ErrorCode::ShapeMismatch, std::to_string(values.size()) + " values for shape " +
                                       shape_str(shape));
  }
  Tensor t = Tensor::empty(shape, dtype);
  Storage& s = t.storage_mut();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    switch (dtype) {
      case DType::Float32: s.f32[i] = static_cast<float>(v); break;
      case DType::Int8:
        if (!(v >= -128.0 && v <= 127.0) || v != std::trunc(v)) {
          fail(ErrorCode::DTypeOverflow, "value " + std::to_string(v) + " is not an int8");
        }
        s.i8[i] = static_cast<std::int8_t>(v);
        break;
      case DType::Int64:
        if (v != std::trunc(v)) {
          fail(ErrorCode::DTypeOverflow, "value " + std::to_string(v) + " is not an integer");
        }
        s.i64[i] = static_cast<std::int64_t>(v);
        break;
    }
  }
  if (requires_grad) t.set_requires_grad(true);
  return t;
}

Tensor tensor_new(std::initializer_list<double> values, const Shape& shape, DType dtype,
                  bool requires_grad) {
  return tensor_new(std::span<const double>(values.begin(), values.size()), shape, dtype,
                    requires_grad);
}

std::size_t memory_footprint(const Shape& shape, DType dtype) {
  return shape_numel(shape) * element_size(dtype);
}

std::size_t memory_footprint(const Tensor& t) { return memory_footprint(t.shape(), t.dtype()); }

void require_float(const Tensor& t, std::string_view op) {
  if (t.dtype() != DType::Float32) {
    fail(ErrorCode::DTypeError,
         std::string(op) + " expects float32, got " + std::string(dtype_name(t.dtype())));
  }
}

}  // namespace tt
