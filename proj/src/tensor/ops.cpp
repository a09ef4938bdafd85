// SPDX-License-Identifier: Apache-2.0
#include "ctxlstm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ctxlstm/errors.hpp"
#include "ctxlstm/kernels.hpp"
#include "ctxlstm/tape.hpp"

namespace ctxlstm::ops {
namespace {

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor argument");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

struct AxisSplit {
  std::size_t outer;
  std::size_t n;
  std::size_t inner;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void check_axis(const Tensor& a, std::size_t axis, const char* op) {
  if (axis >= a.rank()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for " + shape_str(a.shape()));
  }
}

// Accumulates upstream gradient into t's scratch if t takes gradients.
void accumulate(const Tensor& t, std::span<const double> g) {
  if (!t.requires_grad()) return;
  auto dst = t.scratch();
  kernels::active().axpy(g.size(), 1.0, g.data(), dst.data());
}

// Unary elementwise op whose derivative is a function of (x, y).
template <class Fwd, class Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  Tensor out = Tensor::zeros(a.shape());
  auto x = a.values();
  auto y = out.mutable_values();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  if (should_record({&a})) {
    active_tape()->record({a}, out, [a, out, deriv]() mutable {
      if (!a.requires_grad()) return;
      auto g = out.scratch();
      auto x = a.values();
      auto y = out.values();
      auto dx = a.scratch();
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * deriv(x[i], y[i]);
    });
  }
  return out;
}

constexpr double kBelowOne = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_str(a.shape()) + " by " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  kernels::active().gemm_nn(m, n, k, a.values().data(), b.values().data(),
                            out.mutable_values().data());
  if (should_record({&a, &b})) {
    active_tape()->record({a, b}, out, [a, b, out, m, n, k]() mutable {
      const auto& kt = kernels::active();
      auto g = out.scratch();
      if (a.requires_grad()) kt.gemm_nt(m, k, n, g.data(), b.values().data(), a.scratch().data());
      if (b.requires_grad()) kt.gemm_tn(k, n, m, a.values().data(), g.data(), b.scratch().data());
    });
  }
  return out;
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_defined(x, "affine");
  require_defined(w, "affine");
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(1)) {
    throw DimensionError("affine: input " + shape_str(x.shape()) + " does not fit weight " +
                         shape_str(w.shape()));
  }
  const std::size_t batch = x.dim(0), in = x.dim(1), out_dim = w.dim(0);
  if (bias.defined() && bias.shape() != Shape{out_dim}) {
    throw DimensionError("affine: bias " + shape_str(bias.shape()) + " does not fit weight " +
                         shape_str(w.shape()));
  }
  Tensor out = Tensor::zeros({batch, out_dim});
  auto y = out.mutable_values();
  if (bias.defined()) {
    auto bv = bias.values();
    for (std::size_t r = 0; r < batch; ++r) std::copy(bv.begin(), bv.end(), y.begin() + r * out_dim);
  }
  const auto& kt = kernels::active();
  kt.gemm_nt(batch, out_dim, in, x.values().data(), w.values().data(), y.data());
  if (should_record({&x, &w, &bias})) {
    std::vector<Tensor> inputs{x, w};
    if (bias.defined()) inputs.push_back(bias);
    active_tape()->record(std::move(inputs), out,
                          [x, w, bias, out, batch, in, out_dim]() mutable {
      const auto& kt = kernels::active();
      auto g = out.scratch();
      if (x.requires_grad()) kt.gemm_nn(batch, in, out_dim, g.data(), w.values().data(), x.scratch().data());
      if (w.requires_grad()) kt.gemm_tn(out_dim, in, batch, g.data(), x.values().data(), w.scratch().data());
      if (bias.defined() && bias.requires_grad()) {
        auto db = bias.scratch();
        for (std::size_t r = 0; r < batch; ++r) kt.axpy(out_dim, 1.0, g.data() + r * out_dim, db.data());
      }
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined(a, "add");
  require_defined(b, "add");
  const auto& kt = kernels::active();
  if (a.shape() == b.shape()) {
    Tensor out = Tensor::zeros(a.shape());
    kt.add(a.numel(), a.values().data(), b.values().data(), out.mutable_values().data());
    if (should_record({&a, &b})) {
      active_tape()->record({a, b}, out, [a, b, out]() mutable {
        auto g = out.scratch();
        accumulate(a, g);
        accumulate(b, g);
      });
    }
    return out;
  }
  if (b.rank() == 1 && a.shape().back() == b.dim(0)) {
    const std::size_t width = b.dim(0);
    const std::size_t rows = a.numel() / width;
    Tensor out = Tensor::zeros(a.shape());
    auto y = out.mutable_values();
    for (std::size_t r = 0; r < rows; ++r) {
      kt.add(width, a.values().data() + r * width, b.values().data(), y.data() + r * width);
    }
    if (should_record({&a, &b})) {
      active_tape()->record({a, b}, out, [a, b, out, rows, width]() mutable {
        auto g = out.scratch();
        accumulate(a, g);
        if (b.requires_grad()) {
          auto db = b.scratch();
          for (std::size_t r = 0; r < rows; ++r) {
            kernels::active().axpy(width, 1.0, g.data() + r * width, db.data());
          }
        }
      });
    }
    return out;
  }
  throw DimensionError("add: incompatible shapes " + shape_str(a.shape()) + " and " +
                       shape_str(b.shape()));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_defined(a, "sub");
  require_defined(b, "sub");
  require_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  auto av = a.values();
  auto bv = b.values();
  auto y = out.mutable_values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] - bv[i];
  if (should_record({&a, &b})) {
    active_tape()->record({a, b}, out, [a, b, out]() mutable {
      auto g = out.scratch();
      accumulate(a, g);
      if (b.requires_grad()) kernels::active().axpy(g.size(), -1.0, g.data(), b.scratch().data());
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined(a, "mul");
  require_defined(b, "mul");
  require_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  kernels::active().mul(a.numel(), a.values().data(), b.values().data(), out.mutable_values().data());
  if (should_record({&a, &b})) {
    active_tape()->record({a, b}, out, [a, b, out]() mutable {
      const auto& kt = kernels::active();
      auto g = out.scratch();
      if (a.requires_grad()) kt.mul_acc(g.size(), g.data(), b.values().data(), a.scratch().data());
      if (b.requires_grad()) kt.mul_acc(g.size(), g.data(), a.values().data(), b.scratch().data());
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double factor) {
  require_defined(a, "scale");
  Tensor out = Tensor::zeros(a.shape());
  auto x = a.values();
  auto y = out.mutable_values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] * factor;
  if (should_record({&a})) {
    active_tape()->record({a}, out, [a, out, factor]() mutable {
      if (!a.requires_grad()) return;
      auto g = out.scratch();
      kernels::active().axpy(g.size(), factor, g.data(), a.scratch().data());
    });
  }
  return out;
}

// Outputs are clamped just inside the open interval so the range stays
// strict where the exact result rounds to an endpoint.
Tensor sigmoid(const Tensor& a) {
  require_defined(a, "sigmoid");
  return unary(
      a,
      [](double x) {
        const double y = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        return std::clamp(y, std::numeric_limits<double>::min(), kBelowOne);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  require_defined(a, "tanh");
  return unary(
      a, [](double x) { return std::clamp(std::tanh(x), -kBelowOne, kBelowOne); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  require_defined(a, "relu");
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
  require_defined(a, "exp");
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  require_defined(a, "log");
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor concat_last(const Tensor& a, const Tensor& b) {
  require_defined(a, "concat_last");
  require_defined(b, "concat_last");
  Shape lead_a(a.shape().begin(), a.shape().end() - 1);
  Shape lead_b(b.shape().begin(), b.shape().end() - 1);
  if (lead_a != lead_b) {
    throw DimensionError("concat_last: leading shapes differ " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  const std::size_t p = a.shape().back(), q = b.shape().back();
  const std::size_t rows = a.numel() / p;
  Shape shape = lead_a;
  shape.push_back(p + q);
  Tensor out = Tensor::zeros(shape);
  auto y = out.mutable_values();
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.begin() + r * p, p, y.begin() + r * (p + q));
    std::copy_n(bv.begin() + r * q, q, y.begin() + r * (p + q) + p);
  }
  if (should_record({&a, &b})) {
    active_tape()->record({a, b}, out, [a, b, out, rows, p, q]() mutable {
      auto g = out.scratch();
      const auto& kt = kernels::active();
      if (a.requires_grad()) {
        auto da = a.scratch();
        for (std::size_t r = 0; r < rows; ++r) kt.axpy(p, 1.0, g.data() + r * (p + q), da.data() + r * p);
      }
      if (b.requires_grad()) {
        auto db = b.scratch();
        for (std::size_t r = 0; r < rows; ++r) kt.axpy(q, 1.0, g.data() + r * (p + q) + p, db.data() + r * q);
      }
    });
  }
  return out;
}

Tensor softmax_last(const Tensor& a) {
  require_defined(a, "softmax_last");
  const std::size_t c = a.shape().back();
  const std::size_t rows = a.numel() / c;
  Tensor out = Tensor::zeros(a.shape());
  auto x = a.values();
  auto y = out.mutable_values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * c;
    double* yr = y.data() + r * c;
    const double mx = *std::max_element(xr, xr + c);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += (yr[j] = std::exp(xr[j] - mx));
    for (std::size_t j = 0; j < c; ++j) yr[j] /= total;
  }
  if (should_record({&a})) {
    active_tape()->record({a}, out, [a, out, rows, c]() mutable {
      if (!a.requires_grad()) return;
      auto g = out.scratch();
      auto y = out.values();
      auto dx = a.scratch();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* gr = g.data() + r * c;
        const double* yr = y.data() + r * c;
        double inner = 0.0;
        for (std::size_t j = 0; j < c; ++j) inner += gr[j] * yr[j];
        for (std::size_t j = 0; j < c; ++j) dx[r * c + j] += yr[j] * (gr[j] - inner);
      }
    });
  }
  return out;
}

Tensor sum_all(const Tensor& a) {
  require_defined(a, "sum_all");
  double total = 0.0;
  for (double v : a.values()) total += v;
  Tensor out = Tensor::scalar(total);
  if (should_record({&a})) {
    active_tape()->record({a}, out, [a, out]() mutable {
      if (!a.requires_grad()) return;
      const double g = out.scratch()[0];
      for (double& d : a.scratch()) d += g;
    });
  }
  return out;
}

Tensor mean_all(const Tensor& a) {
  require_defined(a, "mean_all");
  return scale(sum_all(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor sum_axis(const Tensor& a, std::size_t axis) {
  require_defined(a, "sum_axis");
  check_axis(a, axis, "sum_axis");
  const AxisSplit s = split_at(a.shape(), axis);
  Shape shape = a.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (shape.empty()) shape = {1};
  Tensor out = Tensor::zeros(shape);
  auto x = a.values();
  auto y = out.mutable_values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.n; ++i) {
      for (std::size_t j = 0; j < s.inner; ++j) y[o * s.inner + j] += x[(o * s.n + i) * s.inner + j];
    }
  }
  if (should_record({&a})) {
    active_tape()->record({a}, out, [a, out, s]() mutable {
      if (!a.requires_grad()) return;
      auto g = out.scratch();
      auto dx = a.scratch();
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.n; ++i) {
          for (std::size_t j = 0; j < s.inner; ++j) dx[(o * s.n + i) * s.inner + j] += g[o * s.inner + j];
        }
      }
    });
  }
  return out;
}

Tensor mean_axis(const Tensor& a, std::size_t axis) {
  require_defined(a, "mean_axis");
  check_axis(a, axis, "mean_axis");
  return scale(sum_axis(a, axis), 1.0 / static_cast<double>(a.dim(axis)));
}

Tensor reshape(const Tensor& a, Shape shape) {
  require_defined(a, "reshape");
  validate_shape(shape);
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  Tensor out = Tensor::from(std::move(shape), std::vector<double>(a.values().begin(), a.values().end()));
  if (should_record({&a})) {
    active_tape()->record({a}, out, [a, out]() mutable { accumulate(a, out.scratch()); });
  }
  return out;
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
  require_defined(a, "slice");
  check_axis(a, axis, "slice");
  if (length == 0 || start + length > a.dim(axis)) {
    throw DimensionError("slice: range [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") out of bounds on axis " +
                         std::to_string(axis) + " of " + shape_str(a.shape()));
  }
  const AxisSplit s = split_at(a.shape(), axis);
  Shape shape = a.shape();
  shape[axis] = length;
  Tensor out = Tensor::zeros(shape);
  auto x = a.values();
  auto y = out.mutable_values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.begin() + (o * s.n + start) * s.inner, length * s.inner,
                y.begin() + o * length * s.inner);
  }
  if (should_record({&a})) {
    active_tape()->record({a}, out, [a, out, s, start, length]() mutable {
      if (!a.requires_grad()) return;
      auto g = out.scratch();
      auto dx = a.scratch();
      for (std::size_t o = 0; o < s.outer; ++o) {
        kernels::active().axpy(length * s.inner, 1.0, g.data() + o * length * s.inner,
                               dx.data() + (o * s.n + start) * s.inner);
      }
    });
  }
  return out;
}

Tensor select(const Tensor& a, std::size_t axis, std::size_t index) {
  require_defined(a, "select");
  check_axis(a, axis, "select");
  if (index >= a.dim(axis)) {
    throw DimensionError("select: index " + std::to_string(index) + " out of range on axis " +
                         std::to_string(axis) + " of " + shape_str(a.shape()));
  }
  const AxisSplit s = split_at(a.shape(), axis);
  Shape shape = a.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (shape.empty()) shape = {1};
  Tensor out = Tensor::zeros(shape);
  auto x = a.values();
  auto y = out.mutable_values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.begin() + (o * s.n + index) * s.inner, s.inner, y.begin() + o * s.inner);
  }
  if (should_record({&a})) {
    active_tape()->record({a}, out, [a, out, s, index]() mutable {
      if (!a.requires_grad()) return;
      auto g = out.scratch();
      auto dx = a.scratch();
      for (std::size_t o = 0; o < s.outer; ++o) {
        kernels::active().axpy(s.inner, 1.0, g.data() + o * s.inner,
                               dx.data() + (o * s.n + index) * s.inner);
      }
    });
  }
  return out;
}

Tensor stack(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("stack: no tensors given");
  for (const auto& p : parts) require_defined(p, "stack");
  const Shape& base = parts.front().shape();
  for (const auto& p : parts) {
    if (p.shape() != base) {
      throw DimensionError("stack: shape mismatch " + shape_str(base) + " vs " + shape_str(p.shape()));
    }
  }
  if (axis > base.size()) throw DimensionError("stack: axis out of range for " + shape_str(base));
  Shape shape = base;
  shape.insert(shape.begin() + static_cast<std::ptrdiff_t>(axis), parts.size());
  const AxisSplit s = split_at(shape, axis);
  Tensor out = Tensor::zeros(shape);
  auto y = out.mutable_values();
  for (std::size_t i = 0; i < s.n; ++i) {
    auto x = parts[i].values();
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(x.begin() + o * s.inner, s.inner, y.begin() + (o * s.n + i) * s.inner);
    }
  }
  bool record = false;
  for (const auto& p : parts) record = record || should_record({&p});
  if (record) {
    active_tape()->record(parts, out, [parts, out, s]() mutable {
      auto g = out.scratch();
      for (std::size_t i = 0; i < s.n; ++i) {
        const Tensor& p = parts[i];
        if (!p.requires_grad()) continue;
        auto dx = p.scratch();
        for (std::size_t o = 0; o < s.outer; ++o) {
          kernels::active().axpy(s.inner, 1.0, g.data() + (o * s.n + i) * s.inner,
                                 dx.data() + o * s.inner);
        }
      }
    });
  }
  return out;
}

Tensor transpose_last_two(const Tensor& a) {
  require_defined(a, "transpose_last_two");
  if (a.rank() < 2) throw DimensionError("transpose_last_two: need rank >= 2, got " + shape_str(a.shape()));
  Shape shape = a.shape();
  const std::size_t r = shape[shape.size() - 2], c = shape.back();
  std::swap(shape[shape.size() - 2], shape.back());
  const std::size_t batches = a.numel() / (r * c);
  Tensor out = Tensor::zeros(shape);
  auto x = a.values();
  auto y = out.mutable_values();
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) y[b * r * c + j * r + i] = x[b * r * c + i * c + j];
    }
  }
  if (should_record({&a})) {
    active_tape()->record({a}, out, [a, out, batches, r, c]() mutable {
      if (!a.requires_grad()) return;
      auto g = out.scratch();
      auto dx = a.scratch();
      for (std::size_t b = 0; b < batches; ++b) {
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < c; ++j) dx[b * r * c + i * c + j] += g[b * r * c + j * r + i];
        }
      }
    });
  }
  return out;
}

std::vector<std::size_t> argmax_last(const Tensor& a) {
  require_defined(a, "argmax_last");
  const std::size_t c = a.shape().back();
  const std::size_t rows = a.numel() / c;
  std::vector<std::size_t> result(rows);
  auto x = a.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * c;
    result[r] = static_cast<std::size_t>(std::max_element(xr, xr + c) - xr);
  }
  return result;
}

}  // namespace ctxlstm::ops
