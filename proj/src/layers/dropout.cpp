// SPDX-License-Identifier: Apache-2.0
#include "ctxlstm/errors.hpp"
#include "ctxlstm/layers.hpp"
#include "ctxlstm/ops.hpp"

namespace ctxlstm {

Tensor dropout_forward(const Tensor& x, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  if (mode == Mode::inference || rate == 0.0) return x;
  Tensor mask = Tensor::zeros(x.shape());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask.mutable_values()) m = uniform01(rng) < rate ? 0.0 : keep_scale;
  return ops::mul(x, mask);
}

}  // namespace ctxlstm
