// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "ctxlstm/errors.hpp"
#include "ctxlstm/layers.hpp"
#include "ctxlstm/tape.hpp"

namespace ctxlstm {

BatchNorm BatchNorm::create(std::size_t features, double momentum, double eps) {
  if (!(momentum > 0.0 && momentum <= 1.0)) throw ConfigError("batchnorm momentum must lie in (0, 1]");
  if (!(eps > 0.0)) throw ConfigError("batchnorm eps must be positive");
  BatchNorm bn;
  bn.gamma = Tensor::full({features}, 1.0, true);
  bn.beta = Tensor::zeros({features}, true);
  bn.running_mean = Tensor::zeros({features});
  bn.running_var = Tensor::full({features}, 1.0);
  bn.momentum = momentum;
  bn.eps = eps;
  return bn;
}

Tensor batchnorm_forward(BatchNorm& bn, const Tensor& x, Mode mode) {
  const std::size_t features = bn.features();
  if (x.rank() < 2 || x.shape().back() != features) {
    throw DimensionError("batchnorm: input " + shape_str(x.shape()) + " does not have " +
                         std::to_string(features) + " features");
  }
  const std::size_t rows = x.numel() / features;
  auto xv = x.values();
  auto gamma = bn.gamma.values();
  auto beta = bn.beta.values();
  Tensor out = Tensor::zeros(x.shape());
  auto y = out.mutable_values();

  if (mode == Mode::inference) {
    auto rm = bn.running_mean.values();
    auto rv = bn.running_var.values();
    std::vector<double> inv_std(features);
    for (std::size_t f = 0; f < features; ++f) inv_std[f] = 1.0 / std::sqrt(rv[f] + bn.eps);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t f = 0; f < features; ++f) {
        const std::size_t i = r * features + f;
        y[i] = gamma[f] * (xv[i] - rm[f]) * inv_std[f] + beta[f];
      }
    }
    if (should_record({&x, &bn.gamma, &bn.beta})) {
      Tensor gamma_t = bn.gamma, beta_t = bn.beta;
      active_tape()->record({x, gamma_t, beta_t}, out,
                            [x, gamma_t, beta_t, out, rm = bn.running_mean.clone(), inv_std, rows, features]() mutable {
        auto g = out.scratch();
        auto xv = x.values();
        auto gm = gamma_t.values();
        auto rmv = rm.values();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t f = 0; f < features; ++f) {
            const std::size_t i = r * features + f;
            if (x.requires_grad()) x.scratch()[i] += g[i] * gm[f] * inv_std[f];
            if (gamma_t.requires_grad()) gamma_t.scratch()[f] += g[i] * (xv[i] - rmv[f]) * inv_std[f];
            if (beta_t.requires_grad()) beta_t.scratch()[f] += g[i];
          }
        }
      });
    }
    return out;
  }

  if (rows < 2) {
    throw DataError("batchnorm: training mode needs at least 2 positions per feature, got " +
                    std::to_string(rows));
  }
  const double n = static_cast<double>(rows);
  std::vector<double> mean(features, 0.0), var(features, 0.0), inv_std(features);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t f = 0; f < features; ++f) mean[f] += xv[r * features + f];
  }
  for (double& m : mean) m /= n;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t f = 0; f < features; ++f) {
      const double d = xv[r * features + f] - mean[f];
      var[f] += d * d;
    }
  }
  for (double& v : var) v /= n;
  for (std::size_t f = 0; f < features; ++f) inv_std[f] = 1.0 / std::sqrt(var[f] + bn.eps);

  std::vector<double> xhat(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t f = 0; f < features; ++f) {
      const std::size_t i = r * features + f;
      xhat[i] = (xv[i] - mean[f]) * inv_std[f];
      y[i] = gamma[f] * xhat[i] + beta[f];
    }
  }

  auto rm = bn.running_mean.mutable_values();
  auto rv = bn.running_var.mutable_values();
  const double m = bn.momentum;
  for (std::size_t f = 0; f < features; ++f) {
    rm[f] = (1.0 - m) * rm[f] + m * mean[f];
    rv[f] = (1.0 - m) * rv[f] + m * var[f] * n / (n - 1.0);
  }

  if (should_record({&x, &bn.gamma, &bn.beta})) {
    Tensor gamma_t = bn.gamma, beta_t = bn.beta;
    active_tape()->record({x, gamma_t, beta_t}, out,
                          [x, gamma_t, beta_t, out, xhat = std::move(xhat), inv_std, rows, features]() mutable {
      auto g = out.scratch();
      auto gm = gamma_t.values();
      std::vector<double> sum_dxhat(features, 0.0), sum_dxhat_xhat(features, 0.0);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t f = 0; f < features; ++f) {
          const std::size_t i = r * features + f;
          if (gamma_t.requires_grad()) gamma_t.scratch()[f] += g[i] * xhat[i];
          if (beta_t.requires_grad()) beta_t.scratch()[f] += g[i];
          const double dxhat = g[i] * gm[f];
          sum_dxhat[f] += dxhat;
          sum_dxhat_xhat[f] += dxhat * xhat[i];
        }
      }
      if (!x.requires_grad()) return;
      auto dx = x.scratch();
      const double n = static_cast<double>(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t f = 0; f < features; ++f) {
          const std::size_t i = r * features + f;
          const double dxhat = g[i] * gm[f];
          dx[i] += inv_std[f] / n * (n * dxhat - sum_dxhat[f] - xhat[i] * sum_dxhat_xhat[f]);
        }
      }
    });
  }
  return out;
}

}  // namespace ctxlstm
