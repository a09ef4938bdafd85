// SPDX-License-Identifier: Apache-2.0
//
// Dense double-precision tensor with reverse-mode autodiff support.
//
// A Tensor is a shared handle: copying it aliases the same storage, which is
// what lets the tape refer to forward values during the backward pass. Use
// clone() for an independent copy. Constness is shallow, as for a pointer.
#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ctxlstm {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorStorage {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;     // persistent gradient, empty when absent
  std::vector<double> scratch;  // per-backward-pass accumulator
  bool requires_grad = false;
};
}  // namespace detail

class Tensor {
 public:
  // Null handle; most operations reject it.
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(impl_); }

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  std::span<double> mutable_values() const;
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  void set_requires_grad(bool value) const;

  bool has_grad() const;
  // Throws ContractError when no gradient has been accumulated.
  std::span<const double> grad() const;
  std::span<double> mutable_grad() const;
  void zero_grad() const;
  void clear_grad() const;

  // Deep copy of the values; the copy does not require grad.
  Tensor clone() const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  // Tape internals: the per-pass gradient buffer, allocated on demand.
  std::span<double> scratch() const;
  bool has_scratch() const;
  detail::TensorStorage* storage() const { return impl_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorStorage> impl) : impl_(std::move(impl)) {}
  detail::TensorStorage& checked() const;

  std::shared_ptr<detail::TensorStorage> impl_;
};

// Throws DimensionError when any dimension is zero.
void validate_shape(const Shape& shape);

}  // namespace ctxlstm
