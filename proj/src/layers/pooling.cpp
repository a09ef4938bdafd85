// SPDX-License-Identifier: Apache-2.0
#include "ctxlstm/errors.hpp"
#include "ctxlstm/layers.hpp"
#include "ctxlstm/tape.hpp"

namespace ctxlstm {

std::size_t pooled_length(std::size_t time, std::size_t kernel, std::size_t stride) {
  if (kernel == 0 || stride == 0) throw ConfigError("pool kernel and stride must be >= 1");
  if (time < kernel) {
    throw DimensionError("maxpool: sequence too short, time " + std::to_string(time) +
                         " < kernel " + std::to_string(kernel));
  }
  return (time - kernel) / stride + 1;
}

Tensor maxpool_time(const Tensor& x, std::size_t kernel, std::size_t stride) {
  if (x.rank() != 3) throw DimensionError("maxpool: expected [batch,time,features], got " + shape_str(x.shape()));
  const std::size_t batch = x.dim(0), time = x.dim(1), features = x.dim(2);
  const std::size_t out_time = pooled_length(time, kernel, stride);
  Tensor out = Tensor::zeros({batch, out_time, features});
  auto xv = x.values();
  auto y = out.mutable_values();
  // argmax[o] is the flat input index feeding output element o.
  std::vector<std::size_t> argmax(out.numel());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < out_time; ++j) {
      for (std::size_t f = 0; f < features; ++f) {
        std::size_t best = (b * time + j * stride) * features + f;
        for (std::size_t k = 1; k < kernel; ++k) {
          const std::size_t i = (b * time + j * stride + k) * features + f;
          if (xv[i] > xv[best]) best = i;
        }
        const std::size_t o = (b * out_time + j) * features + f;
        y[o] = xv[best];
        argmax[o] = best;
      }
    }
  }
  if (should_record({&x})) {
    active_tape()->record({x}, out, [x, out, argmax = std::move(argmax)]() mutable {
      if (!x.requires_grad()) return;
      auto g = out.scratch();
      auto dx = x.scratch();
      for (std::size_t o = 0; o < g.size(); ++o) dx[argmax[o]] += g[o];
    });
  }
  return out;
}

}  // namespace ctxlstm
