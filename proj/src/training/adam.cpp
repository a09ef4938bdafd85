// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "ctxlstm/errors.hpp"
#include "ctxlstm/training.hpp"

namespace ctxlstm {

AdamState AdamState::for_params(std::span<const NamedTensor> params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.tensor.numel(), 0.0);
    s.v.emplace_back(p.tensor.numel(), 0.0);
  }
  return s;
}

void adam_step(std::span<const NamedTensor> params, AdamState& state, const TrainConfig& cfg) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractError("adam: optimizer state does not match parameter list");
  }
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) throw ContractError("adam: parameter '" + p.name + "' has no gradient");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double correct1 = 1.0 - std::pow(b1, t);
  const double correct2 = 1.0 - std::pow(b2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor param = params[k].tensor;
    auto theta = param.mutable_values();
    auto g = param.grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != theta.size()) throw ContractError("adam: moment size mismatch for '" + params[k].name + "'");
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / correct1;
      const double v_hat = v[i] / correct2;
      theta[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
    param.clear_grad();
  }
}

}  // namespace ctxlstm
