// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <vector>

#include "ctxlstm/tensor.hpp"

namespace ctxlstm {

// A deterministic scalar-valued function of its arguments.
using ScalarFn = std::function<Tensor(const Tensor&)>;
using ClosureFn = std::function<Tensor()>;

// Max over components of |analytic - numeric| / max(1e-8, |analytic| + |numeric|),
// numeric being the central difference (f(x+eps) - f(x-eps)) / 2eps.
// x must be a leaf; its requires_grad flag and values are restored on return.
double grad_check(const ScalarFn& f, Tensor x, double eps = 1e-5);

// Same measure taken jointly over several leaves that f reads implicitly.
double grad_check(const ClosureFn& f, const std::vector<Tensor>& leaves, double eps = 1e-5);

}  // namespace ctxlstm
