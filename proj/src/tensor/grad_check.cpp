// SPDX-License-Identifier: Apache-2.0
#include "ctxlstm/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "ctxlstm/errors.hpp"
#include "ctxlstm/tape.hpp"

namespace ctxlstm {

double grad_check(const ClosureFn& f, const std::vector<Tensor>& leaves, double eps) {
  std::vector<bool> saved_flags;
  std::vector<std::vector<double>> saved_grads;
  for (const auto& leaf : leaves) {
    saved_flags.push_back(leaf.requires_grad());
    saved_grads.emplace_back(leaf.has_grad() ? std::vector<double>(leaf.grad().begin(), leaf.grad().end())
                                             : std::vector<double>{});
  }

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    TapeScope scope(&tape);
    for (Tensor leaf : leaves) {
      leaf.set_requires_grad(true);
      leaf.clear_grad();
    }
    Tensor loss = f();
    if (loss.numel() != 1) throw ContractError("grad_check: function is not scalar-valued");
    backward(loss, tape);
    for (const auto& leaf : leaves) {
      analytic.emplace_back(leaf.has_grad() ? std::vector<double>(leaf.grad().begin(), leaf.grad().end())
                                            : std::vector<double>(leaf.numel(), 0.0));
    }
  }

  double worst = 0.0;
  {
    TapeScope off(nullptr);
    for (std::size_t l = 0; l < leaves.size(); ++l) {
      Tensor leaf = leaves[l];
      auto vals = leaf.mutable_values();
      for (std::size_t i = 0; i < vals.size(); ++i) {
        const double orig = vals[i];
        vals[i] = orig + eps;
        const double plus = f().item();
        vals[i] = orig - eps;
        const double minus = f().item();
        vals[i] = orig;
        const double numeric = (plus - minus) / (2.0 * eps);
        const double a = analytic[l][i];
        const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
        worst = std::max(worst, err);
      }
    }
  }

  for (std::size_t l = 0; l < leaves.size(); ++l) {
    Tensor leaf = leaves[l];
    leaf.set_requires_grad(saved_flags[l]);
    leaf.clear_grad();
    if (!saved_grads[l].empty()) {
      auto g = leaf.mutable_grad();
      std::copy(saved_grads[l].begin(), saved_grads[l].end(), g.begin());
    }
  }
  return worst;
}

double grad_check(const ScalarFn& f, Tensor x, double eps) {
  return grad_check([&]() { return f(x); }, std::vector<Tensor>{x}, eps);
}

}  // namespace ctxlstm
