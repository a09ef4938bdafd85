// SPDX-License-Identifier: Apache-2.0
#include "ctxlstm/errors.hpp"
#include "ctxlstm/layers.hpp"
#include "ctxlstm/ops.hpp"

namespace ctxlstm {

void JunctionConfig::validate() const {
  if (pool_kernel < 1 || pool_stride < 1) throw ConfigError("junction pool kernel and stride must be >= 1");
}

Tensor junction_forward(const JunctionConfig& cfg, BatchNorm& bn, const Tensor& x, Mode mode) {
  cfg.validate();
  if (x.rank() != 3) throw DimensionError("junction: expected [batch,time,features], got " + shape_str(x.shape()));
  if (cfg.pool_enabled && x.dim(1) < cfg.pool_kernel) {
    throw DimensionError("junction: sequence too short, time " + std::to_string(x.dim(1)) +
                         " < pool kernel " + std::to_string(cfg.pool_kernel));
  }
  Tensor y = cfg.order == JunctionOrder::relu_then_bn ? batchnorm_forward(bn, ops::relu(x), mode)
                                                      : ops::relu(batchnorm_forward(bn, x, mode));
  if (cfg.pool_enabled) y = maxpool_time(y, cfg.pool_kernel, cfg.pool_stride);
  return y;
}

}  // namespace ctxlstm
