// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "ctxlstm/errors.hpp"
#include "ctxlstm/layers.hpp"
#include "ctxlstm/ops.hpp"

namespace ctxlstm {

Linear Linear::uniform(std::size_t in, std::size_t out, Rng& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(in));
  Linear layer{Tensor::zeros({out, in}, true), Tensor::zeros({out}, true)};
  for (double& v : layer.weight.mutable_values()) v = ctxlstm::uniform(rng, -k, k);
  for (double& v : layer.bias.mutable_values()) v = ctxlstm::uniform(rng, -k, k);
  return layer;
}

Tensor linear_forward(const Linear& layer, const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != layer.in_features()) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " does not fit weight " +
                         shape_str(layer.weight.shape()));
  }
  return ops::affine(x, layer.weight, layer.bias);
}

}  // namespace ctxlstm
