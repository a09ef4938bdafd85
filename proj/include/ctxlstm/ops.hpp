// SPDX-License-Identifier: Apache-2.0
//
// Differentiable tensor operations. Each records a backward rule on the
// active tape when any input requires grad. Shape errors throw
// DimensionError naming the offending shapes.
#pragma once

#include <cstddef>
#include <vector>

#include "ctxlstm/tensor.hpp"

namespace ctxlstm::ops {

// a[m,k] * b[k,n]
Tensor matmul(const Tensor& a, const Tensor& b);
// x[batch,in] * w[out,in]^T + bias[out]; bias may be undefined.
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& bias);

// Elementwise sum. b may also be a vector matching a's last dimension, in
// which case it is broadcast over the leading axes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
// Gradient is zero at exactly 0.
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);

Tensor concat_last(const Tensor& a, const Tensor& b);
Tensor softmax_last(const Tensor& a);

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
// Reduce over one axis, removing it. A rank-1 input reduces to shape [1].
Tensor sum_axis(const Tensor& a, std::size_t axis);
Tensor mean_axis(const Tensor& a, std::size_t axis);

Tensor reshape(const Tensor& a, Shape shape);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);
// Index one position along axis, removing that axis.
Tensor select(const Tensor& a, std::size_t axis, std::size_t index);
// Inverse of select: joins equally shaped tensors along a new axis.
Tensor stack(const std::vector<Tensor>& parts, std::size_t axis);
Tensor transpose_last_two(const Tensor& a);

// Not differentiable. Ties resolve to the lowest index.
std::vector<std::size_t> argmax_last(const Tensor& a);

}  // namespace ctxlstm::ops
