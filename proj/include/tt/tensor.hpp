#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tt/error.hpp"

namespace tt {

enum class DType : std::uint8_t {
  Float32,
  Int8,
  Int64,  // token ids and argmax results only; never differentiated
};

constexpr std::size_t element_size(DType dtype) {
  switch (dtype) {
    case DType::Float32: return 4;
    case DType::Int8: return 1;
    case DType::Int64: return 8;
  }
  return 0;
}

std::string_view dtype_name(DType dtype);

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Right-aligned broadcasting: pad the shorter shape with leading 1s, then
/// each dimension must agree or be 1. Throws BroadcastError naming the
/// first (rightmost-counted) incompatible dimension.
Shape broadcast_shapes(const Shape& a, const Shape& b);

// Byte accounting for every buffer allocated by the framework on the
// current thread. Grad buffers and tape-saved values are buffers too.
struct MemoryStats {
  std::int64_t live_bytes = 0;
  std::int64_t peak_bytes = 0;
  std::int64_t allocated_bytes = 0;  // cumulative
  std::int64_t live_buffers = 0;
};

const MemoryStats& memory_stats();
// Resets the peak to the current live figure so a region's peak can be read.
void reset_peak_memory();

class Storage {
 public:
  Storage(DType dtype, std::size_t count);
  ~Storage();
  Storage(const Storage&) = delete;
  Storage& operator=(const Storage&) = delete;

  DType dtype() const { return dtype_; }
  std::size_t count() const { return count_; }
  std::size_t bytes() const { return count_ * element_size(dtype_); }

  std::vector<float> f32;
  std::vector<std::int8_t> i8;
  std::vector<std::int64_t> i64;

 private:
  DType dtype_;
  std::size_t count_;
};

struct Node;

struct TensorImpl {
  std::shared_ptr<Storage> storage;
  Shape shape;
  bool requires_grad = false;
  std::shared_ptr<TensorImpl> grad;
  std::shared_ptr<Node> grad_fn;
};

/// Shared handle to a dense, row-major tensor. Copies alias the same
/// buffer; use clone() for a deep copy. A default-constructed Tensor is
/// undefined and only valid as a placeholder.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor empty(const Shape& shape, DType dtype = DType::Float32);
  static Tensor zeros(const Shape& shape);
  static Tensor ones(const Shape& shape);
  static Tensor full(const Shape& shape, float value);
  static Tensor scalar(float value);
  static Tensor from(std::vector<float> values, const Shape& shape, bool requires_grad = false);
  static Tensor from_ids(std::vector<std::int64_t> ids, const Shape& shape);
  static Tensor from_int8(std::vector<std::int8_t> values, const Shape& shape);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->storage->count(); }
  DType dtype() const { return impl_->storage->dtype(); }

  std::span<const float> data() const;
  std::span<float> data_mut();
  std::span<const std::int8_t> int8_data() const;
  std::span<const std::int64_t> ids() const;
  std::span<std::int64_t> ids_mut();

  float item() const;
  float at(std::initializer_list<std::size_t> index) const;
  std::vector<float> to_vector() const;

  bool requires_grad() const { return impl_->requires_grad; }
  // Throws GradModeOff unless grad mode is enabled on this thread.
  Tensor& set_requires_grad(bool flag);
  bool is_leaf() const { return impl_->grad_fn == nullptr; }
  const std::shared_ptr<Node>& grad_fn() const { return impl_->grad_fn; }

  bool has_grad() const { return impl_->grad != nullptr; }
  std::optional<Tensor> grad() const;
  void clear_grad() { impl_->grad.reset(); }
  // Adds g into grad, allocating it on first use.
  void accumulate_grad(const Tensor& g);

  // Same buffer, no graph attachment.
  Tensor detach() const;
  Tensor clone() const;

  const Storage& storage() const { return *impl_->storage; }
  Storage& storage_mut() { return *impl_->storage; }
  const std::shared_ptr<Storage>& storage_ptr() const { return impl_->storage; }
  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& impl_ptr() const { return impl_; }
  bool same(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// Generic constructor: values are range-checked against the dtype.
/// ShapeMismatch if the count disagrees with the shape; DTypeOverflow for
/// out-of-range Int8 values.
Tensor tensor_new(std::span<const double> values, const Shape& shape, DType dtype,
                  bool requires_grad = false);
Tensor tensor_new(std::initializer_list<double> values, const Shape& shape, DType dtype,
                  bool requires_grad = false);

/// product(shape) * element_size(dtype); excludes grad and metadata.
std::size_t memory_footprint(const Tensor& t);
std::size_t memory_footprint(const Shape& shape, DType dtype);

void require_float(const Tensor& t, std::string_view op);

}  // namespace tt
