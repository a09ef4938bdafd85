// SPDX-License-Identifier: Apache-2.0
#include "ctxlstm/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ctxlstm/grad_check.hpp"
#include "ctxlstm/layers.hpp"
#include "ctxlstm/model.hpp"
#include "ctxlstm/ops.hpp"
#include "ctxlstm/random.hpp"
#include "ctxlstm/training.hpp"

namespace ctxlstm {
namespace {

constexpr int kShapesPerCase = 5;
// Whole models are costly to difference, so they are sampled twice.
constexpr int kModelSamples = 2;

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + uniform_index(rng, hi - lo + 1); }

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.mutable_values()) v = uniform(rng, lo, hi);
  return t;
}

// Values bounded away from zero, for relu.
Tensor away_from_zero(Shape shape, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.mutable_values()) {
    const double mag = uniform(rng, 0.05, 1.0);
    v = uniform01(rng) < 0.5 ? -mag : mag;
  }
  return t;
}

// Distinct values on a 0.1 grid, so pooling windows never tie.
Tensor distinct_values(Shape shape, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  auto v = t.mutable_values();
  std::vector<double> grid(v.size());
  std::iota(grid.begin(), grid.end(), 0.0);
  shuffle(grid, rng);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.1 * grid[i] - 0.05 * static_cast<double>(v.size());
  return t;
}

// A fixed random linear functional of y, so every output element carries
// a distinct upstream gradient.
Tensor project(const Tensor& y, const Tensor& weights) { return ops::sum_all(ops::mul(y, weights)); }

using Builder = std::function<double(Rng&)>;

GradCase make_case(std::string name, std::uint64_t seed, Builder build, int shapes) {
  return {std::move(name), [seed, build, shapes]() {
            Rng rng(seed);
            double worst = 0.0;
            for (int s = 0; s < shapes; ++s) worst = std::max(worst, build(rng));
            return worst;
          }};
}

template <class Op>
Builder unary_case(Op op, Tensor (*make)(Shape, Rng&)) {
  return [op, make](Rng& rng) {
    const Shape shape{pick(rng, 1, 3), pick(rng, 1, 4)};
    Tensor x = make(shape, rng);
    Tensor w = random_tensor(op(x).shape(), rng);
    return grad_check([&](const Tensor& in) { return project(op(in), w); }, x);
  };
}

Tensor plain(Shape shape, Rng& rng) { return random_tensor(std::move(shape), rng, -2.0, 2.0); }
Tensor positive(Shape shape, Rng& rng) { return random_tensor(std::move(shape), rng, 0.5, 2.0); }

LSTMCellParams random_cell(std::size_t input, std::size_t hidden, Rng& rng) {
  return LSTMCellParams::uniform(input, hidden, rng);
}

std::vector<Tensor> cell_leaves(const LSTMCellParams& p) {
  return {p.w_forget, p.w_input, p.w_cell, p.w_output, p.b_forget, p.b_input, p.b_cell, p.b_output};
}

std::vector<Tensor> model_leaves(const SequenceClassifier& m) {
  std::vector<Tensor> leaves;
  for (const auto& p : m.parameters()) leaves.push_back(p.tensor);
  return leaves;
}

}  // namespace

std::vector<GradCase> standard_grad_cases(std::uint64_t seed) {
  std::vector<GradCase> cases;
  std::uint64_t stream = 0;
  auto add = [&](std::string name, Builder b, int shapes = kShapesPerCase) {
    cases.push_back(make_case(std::move(name), derive_seed(seed, ++stream), std::move(b), shapes));
  };

  add("matmul", [](Rng& rng) {
    const std::size_t m = pick(rng, 1, 4), k = pick(rng, 1, 4), n = pick(rng, 1, 4);
    Tensor a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng), w = random_tensor({m, n}, rng);
    return grad_check([&]() { return project(ops::matmul(a, b), w); }, {a, b});
  });
  add("affine", [](Rng& rng) {
    const std::size_t batch = pick(rng, 1, 4), in = pick(rng, 1, 5), out = pick(rng, 1, 4);
    Tensor x = random_tensor({batch, in}, rng), wt = random_tensor({out, in}, rng), b = random_tensor({out}, rng);
    Tensor w = random_tensor({batch, out}, rng);
    return grad_check([&]() { return project(ops::affine(x, wt, b), w); }, {x, wt, b});
  });
  add("add", [](Rng& rng) {
    const Shape s{pick(rng, 1, 3), pick(rng, 1, 4)};
    Tensor a = random_tensor(s, rng), b = random_tensor(s, rng), w = random_tensor(s, rng);
    return grad_check([&]() { return project(ops::add(a, b), w); }, {a, b});
  });
  add("add_bias_broadcast", [](Rng& rng) {
    const Shape s{pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 4)};
    Tensor a = random_tensor(s, rng), b = random_tensor({s.back()}, rng), w = random_tensor(s, rng);
    return grad_check([&]() { return project(ops::add(a, b), w); }, {a, b});
  });
  add("sub", [](Rng& rng) {
    const Shape s{pick(rng, 1, 3), pick(rng, 1, 4)};
    Tensor a = random_tensor(s, rng), b = random_tensor(s, rng), w = random_tensor(s, rng);
    return grad_check([&]() { return project(ops::sub(a, b), w); }, {a, b});
  });
  add("mul", [](Rng& rng) {
    const Shape s{pick(rng, 1, 3), pick(rng, 1, 4)};
    Tensor a = random_tensor(s, rng), b = random_tensor(s, rng), w = random_tensor(s, rng);
    return grad_check([&]() { return project(ops::mul(a, b), w); }, {a, b});
  });
  add("scale", unary_case([](const Tensor& x) { return ops::scale(x, -1.7); }, plain));
  add("sigmoid", unary_case([](const Tensor& x) { return ops::sigmoid(x); }, plain));
  add("tanh", unary_case([](const Tensor& x) { return ops::tanh(x); }, plain));
  add("relu", unary_case([](const Tensor& x) { return ops::relu(x); }, away_from_zero));
  add("exp", unary_case([](const Tensor& x) { return ops::exp(x); }, plain));
  add("log", unary_case([](const Tensor& x) { return ops::log(x); }, positive));
  add("softmax_last", unary_case([](const Tensor& x) { return ops::softmax_last(x); }, plain));
  add("transpose_last_two", unary_case([](const Tensor& x) { return ops::transpose_last_two(x); }, plain));
  add("concat_last", [](Rng& rng) {
    const std::size_t rows = pick(rng, 1, 3), p = pick(rng, 1, 3), q = pick(rng, 1, 3);
    Tensor a = random_tensor({rows, p}, rng), b = random_tensor({rows, q}, rng), w = random_tensor({rows, p + q}, rng);
    return grad_check([&]() { return project(ops::concat_last(a, b), w); }, {a, b});
  });
  add("sum_all", [](Rng& rng) {
    Tensor x = random_tensor({pick(rng, 1, 3), pick(rng, 1, 4)}, rng);
    return grad_check([&](const Tensor& in) { return ops::scale(ops::sum_all(in), 0.7); }, x);
  });
  add("mean_all", [](Rng& rng) {
    Tensor x = random_tensor({pick(rng, 1, 3), pick(rng, 1, 4)}, rng);
    return grad_check([&](const Tensor& in) { return ops::mean_all(ops::mul(in, in)); }, x);
  });
  add("sum_axis", [](Rng& rng) {
    const Shape s{pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 3)};
    const std::size_t axis = pick(rng, 0, 2);
    Tensor x = random_tensor(s, rng);
    Shape reduced = s;
    reduced.erase(reduced.begin() + static_cast<std::ptrdiff_t>(axis));
    Tensor w = random_tensor(reduced, rng);
    return grad_check([&](const Tensor& in) { return project(ops::sum_axis(in, axis), w); }, x);
  });
  add("mean_axis", [](Rng& rng) {
    const Shape s{pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 3)};
    const std::size_t axis = pick(rng, 0, 2);
    Tensor x = random_tensor(s, rng);
    Shape reduced = s;
    reduced.erase(reduced.begin() + static_cast<std::ptrdiff_t>(axis));
    Tensor w = random_tensor(reduced, rng);
    return grad_check([&](const Tensor& in) { return project(ops::mean_axis(in, axis), w); }, x);
  });
  add("reshape", [](Rng& rng) {
    const std::size_t a = pick(rng, 1, 3), b = pick(rng, 1, 4);
    Tensor x = random_tensor({a, b}, rng), w = random_tensor({b, a}, rng);
    return grad_check([&](const Tensor& in) { return project(ops::reshape(in, {b, a}), w); }, x);
  });
  add("slice", [](Rng& rng) {
    const Shape s{pick(rng, 1, 3), pick(rng, 2, 5)};
    const std::size_t start = pick(rng, 0, s[1] - 1), len = pick(rng, 1, s[1] - start);
    Tensor x = random_tensor(s, rng), w = random_tensor({s[0], len}, rng);
    return grad_check([&](const Tensor& in) { return project(ops::slice(in, 1, start, len), w); }, x);
  });
  add("select", [](Rng& rng) {
    const Shape s{pick(rng, 1, 3), pick(rng, 1, 4), pick(rng, 1, 3)};
    const std::size_t idx = pick(rng, 0, s[1] - 1);
    Tensor x = random_tensor(s, rng), w = random_tensor({s[0], s[2]}, rng);
    return grad_check([&](const Tensor& in) { return project(ops::select(in, 1, idx), w); }, x);
  });
  add("stack", [](Rng& rng) {
    const Shape s{pick(rng, 1, 3), pick(rng, 1, 3)};
    Tensor a = random_tensor(s, rng), b = random_tensor(s, rng), c = random_tensor(s, rng);
    Tensor w = random_tensor({s[0], 3, s[1]}, rng);
    return grad_check([&]() { return project(ops::stack({a, b, c}, 1), w); }, {a, b, c});
  });
  add("cross_entropy", [](Rng& rng) {
    const std::size_t batch = pick(rng, 1, 4), classes = pick(rng, 2, 5);
    Tensor logits = random_tensor({batch, classes}, rng, -2.0, 2.0);
    std::vector<std::size_t> labels(batch);
    for (auto& l : labels) l = uniform_index(rng, classes);
    return grad_check([&](const Tensor& in) { return cross_entropy(in, labels); }, logits);
  });
  add("lstm_cell", [](Rng& rng) {
    const std::size_t batch = 2, input = pick(rng, 2, 4), hidden = pick(rng, 2, 4);
    LSTMCellParams p = random_cell(input, hidden, rng);
    Tensor x = random_tensor({batch, input}, rng), h = random_tensor({batch, hidden}, rng),
           c = random_tensor({batch, hidden}, rng);
    Tensor wh = random_tensor({batch, hidden}, rng), wc = random_tensor({batch, hidden}, rng);
    auto leaves = cell_leaves(p);
    leaves.insert(leaves.end(), {x, h, c});
    return grad_check(
        [&]() {
          LSTMState s = lstm_cell_forward(p, x, {h, c});
          return ops::add(project(s.h, wh), project(s.c, wc));
        },
        leaves);
  });
  add("lstm_layer", [](Rng& rng) {
    const std::size_t batch = 2, time = 3, input = pick(rng, 2, 4), hidden = pick(rng, 2, 4);
    const bool reverse = uniform01(rng) < 0.5;
    LSTMCellParams p = random_cell(input, hidden, rng);
    Tensor seq = random_tensor({batch, time, input}, rng);
    Tensor w = random_tensor({batch, time, hidden}, rng);
    auto leaves = cell_leaves(p);
    leaves.push_back(seq);
    return grad_check(
        [&]() { return project(lstm_layer_forward(p, seq, LSTMState::zeros(batch, hidden), reverse).outputs, w); },
        leaves);
  });
  add("bilstm_block", [](Rng& rng) {
    const std::size_t batch = 2, time = 3, input = pick(rng, 2, 4), hidden = pick(rng, 2, 4);
    LSTMBlockParams p = LSTMBlockParams::uniform(input, hidden, 3, true, rng);
    Tensor seq = random_tensor({batch, time, input}, rng);
    Tensor w = random_tensor({batch, time, hidden}, rng);
    BlockStates init = BlockStates::zeros(p, batch);
    for (auto& s : init.forward) s = {random_tensor({batch, hidden}, rng), random_tensor({batch, hidden}, rng)};
    for (auto& s : init.backward) s = {random_tensor({batch, hidden}, rng), random_tensor({batch, hidden}, rng)};
    std::vector<Tensor> leaves{seq};
    for (const auto& c : p.forward) for (const auto& t : cell_leaves(c)) leaves.push_back(t);
    for (const auto& c : p.backward) for (const auto& t : cell_leaves(c)) leaves.push_back(t);
    for (const auto& s : init.forward) leaves.insert(leaves.end(), {s.h, s.c});
    return grad_check([&]() { return project(lstm_block_forward(p, seq, init).outputs, w); }, leaves);
  });
  add("linear", [](Rng& rng) {
    const std::size_t batch = 4, in = 8, out = 3;
    Linear layer = Linear::uniform(in, out, rng);
    Tensor x = random_tensor({batch, in}, rng), w = random_tensor({batch, out}, rng);
    (void)pick(rng, 0, 1);
    return grad_check([&]() { return project(linear_forward(layer, x), w); }, {layer.weight, layer.bias, x});
  });
  add("batchnorm_training", [](Rng& rng) {
    const Shape s{pick(rng, 1, 3), pick(rng, 2, 4), pick(rng, 1, 3)};
    BatchNorm bn = BatchNorm::create(s[2]);
    for (double& g : bn.gamma.mutable_values()) g = uniform(rng, 0.5, 1.5);
    for (double& b : bn.beta.mutable_values()) b = uniform(rng, -0.5, 0.5);
    Tensor x = random_tensor(s, rng), w = random_tensor(s, rng);
    return grad_check([&]() { return project(batchnorm_forward(bn, x, Mode::training), w); }, {x, bn.gamma, bn.beta});
  });
  add("batchnorm_inference", [](Rng& rng) {
    const Shape s{pick(rng, 1, 3), pick(rng, 1, 4), pick(rng, 1, 3)};
    BatchNorm bn = BatchNorm::create(s[2]);
    for (double& m : bn.running_mean.mutable_values()) m = uniform(rng, -0.5, 0.5);
    for (double& v : bn.running_var.mutable_values()) v = uniform(rng, 0.5, 2.0);
    Tensor x = random_tensor(s, rng), w = random_tensor(s, rng);
    return grad_check([&]() { return project(batchnorm_forward(bn, x, Mode::inference), w); }, {x, bn.gamma, bn.beta});
  });
  add("maxpool_time", [](Rng& rng) {
    const std::size_t kernel = pick(rng, 1, 3), stride = pick(rng, 1, 2);
    const Shape s{pick(rng, 1, 2), pick(rng, kernel, kernel + 4), pick(rng, 1, 3)};
    Tensor x = distinct_values(s, rng);
    Tensor w = random_tensor({s[0], pooled_length(s[1], kernel, stride), s[2]}, rng);
    return grad_check([&](const Tensor& in) { return project(maxpool_time(in, kernel, stride), w); }, x);
  });
  add("dropout", [](Rng& rng) {
    const Shape s{pick(rng, 1, 3), pick(rng, 2, 5)};
    const std::uint64_t mask_seed = rng();
    Tensor x = random_tensor(s, rng), w = random_tensor(s, rng);
    return grad_check(
        [&](const Tensor& in) {
          Rng mask_rng(mask_seed);
          return project(dropout_forward(in, 0.4, Mode::training, mask_rng), w);
        },
        x);
  });
  add("junction", [](Rng& rng) {
    JunctionConfig cfg;
    cfg.order = uniform01(rng) < 0.5 ? JunctionOrder::relu_then_bn : JunctionOrder::bn_then_relu;
    const Shape s{2, pick(rng, 4, 6), pick(rng, 2, 3)};
    BatchNorm bn = BatchNorm::create(s[2]);
    for (double& g : bn.gamma.mutable_values()) g = uniform(rng, 0.5, 1.5);
    for (double& b : bn.beta.mutable_values()) b = uniform(rng, 0.1, 0.5);
    Tensor x = distinct_values(s, rng);
    for (double& v : x.mutable_values()) v += 0.05;
    Tensor w = random_tensor({s[0], pooled_length(s[1], 2, 2), s[2]}, rng);
    return grad_check([&]() { return project(junction_forward(cfg, bn, x, Mode::training), w); }, {x, bn.gamma, bn.beta});
  });
  add("context_lstm_end_to_end", [](Rng& rng) {
    ContextLSTMConfig cfg;
    cfg.input_dim = pick(rng, 2, 4);
    cfg.hidden = pick(rng, 3, 4);
    cfg.blocks = 3;
    cfg.layers_per_block = 1;
    cfg.fc1_out = 5;
    cfg.num_classes = 3;
    cfg.dropout_rate = 0.3;
    cfg.junction.order = uniform01(rng) < 0.5 ? JunctionOrder::relu_then_bn : JunctionOrder::bn_then_relu;
    ContextLSTM model(cfg, rng);
    const std::size_t time = pick(rng, 4, 6);
    Tensor seq = random_tensor({2, time, cfg.input_dim}, rng);
    const std::vector<std::size_t> labels{uniform_index(rng, 3), uniform_index(rng, 3)};
    const std::uint64_t drop_seed = rng();
    return grad_check(
        [&]() {
          Rng drop(drop_seed);
          return cross_entropy(model.forward(seq, Mode::training, drop), labels);
        },
        model_leaves(model));
  }, kModelSamples);
  add("baseline_end_to_end", [](Rng& rng) {
    BaselineConfig cfg;
    cfg.input_dim = 4;
    cfg.hidden = 4;
    cfg.layers = 1;
    cfg.fc1_out = 6;
    cfg.num_classes = 5;
    cfg.dropout_rate = 0.3;
    BaselineLSTM model(cfg, rng);
    Tensor seq = random_tensor({2, 4, 4}, rng);
    const std::vector<std::size_t> labels{uniform_index(rng, 5), uniform_index(rng, 5)};
    const std::uint64_t drop_seed = rng();
    return grad_check(
        [&]() {
          Rng drop(drop_seed);
          return cross_entropy(model.forward(seq, Mode::training, drop), labels);
        },
        model_leaves(model));
  }, kModelSamples);
  return cases;
}

std::vector<GradReport> run_grad_cases(const std::vector<GradCase>& cases, double tolerance) {
  std::vector<GradReport> reports;
  for (const auto& c : cases) {
    const double err = c.run();
    reports.push_back({c.name, err, std::isfinite(err) && err <= tolerance});
  }
  return reports;
}

bool all_passed(const std::vector<GradReport>& reports) {
  return std::all_of(reports.begin(), reports.end(), [](const GradReport& r) { return r.passed; });
}

}  // namespace ctxlstm
