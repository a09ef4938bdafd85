// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "ctxlstm/errors.hpp"
#include "ctxlstm/grad_check.hpp"
#include "ctxlstm/layers.hpp"
#include "ctxlstm/ops.hpp"
#include "ctxlstm/tape.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace ctxlstm;
using test::random_tensor;
using test::to_vector;

namespace {

// Reverses the time axis of [batch, time, features].
Tensor flip_time(const Tensor& x) {
  const std::size_t b = x.dim(0), t = x.dim(1), f = x.dim(2);
  Tensor out = Tensor::zeros(x.shape());
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t s = 0; s < t; ++s) {
      for (std::size_t k = 0; k < f; ++k) out.mutable_values()[(i * t + s) * f + k] = x.at({i, t - 1 - s, k});
    }
  }
  return out;
}

void fill(const Tensor& t, double v) {
  for (double& x : t.mutable_values()) x = v;
}

}  // namespace

TEST_CASE("cell with zero parameters") {
  const LSTMCellParams p = LSTMCellParams::zeros(3, 2);
  Rng rng(1);
  const LSTMState s = lstm_cell_forward(p, random_tensor({4, 3}, rng), LSTMState::zeros(4, 2));
  for (double v : s.c.values()) CHECK(v == 0.0);
  for (double v : s.h.values()) CHECK(v == 0.0);

  const LSTMState prev{Tensor::zeros({1, 2}), Tensor::full({1, 2}, 2.0)};
  const LSTMState s2 = lstm_cell_forward(p, random_tensor({1, 3}, rng), prev);
  for (double v : s2.c.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
  for (double v : s2.h.values()) CHECK(std::abs(v - 0.380797077977882) <= 1e-12);
}

TEST_CASE("scalar cell oracle") {
  LSTMCellParams p = LSTMCellParams::zeros(1, 1);
  for (const Tensor& w : {p.w_forget, p.w_input, p.w_cell, p.w_output}) fill(w, 0.5);
  const LSTMState s = lstm_cell_forward(p, Tensor::full({1, 1}, 1.0), LSTMState::zeros(1, 1));
  CHECK(std::abs(s.c.item() - 0.287649136644968) <= 1e-9);
  CHECK(std::abs(s.h.item() - 0.174269718656105) <= 1e-9);
}

TEST_CASE("cell rejects inconsistent dimensions") {
  const LSTMCellParams p = LSTMCellParams::zeros(3, 2);
  CHECK_THROWS_AS(lstm_cell_forward(p, Tensor::zeros({4, 5}), LSTMState::zeros(4, 2)), DimensionError);
  CHECK_THROWS_AS(lstm_cell_forward(p, Tensor::zeros({4, 3}), LSTMState::zeros(3, 2)), DimensionError);
  CHECK_THROWS_AS(lstm_cell_forward(p, Tensor::zeros({4, 3}), LSTMState::zeros(4, 3)), DimensionError);
}

TEST_CASE("hidden state bound and cell growth bound") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    LSTMCellParams p = LSTMCellParams::uniform(3, 4, rng);
    for (const Tensor& w : {p.w_forget, p.w_input, p.w_cell, p.w_output}) {
      for (double& v : w.mutable_values()) v *= 20.0;
    }
    LSTMState s{random_tensor({2, 4}, rng), random_tensor({2, 4}, rng, -3, 3)};
    const auto c0 = to_vector(s.c);
    for (int t = 1; t <= 10; ++t) {
      s = lstm_cell_forward(p, random_tensor({2, 3}, rng, -5, 5), s);
      for (double h : s.h.values()) CHECK(std::abs(h) < 1.0);
      for (std::size_t i = 0; i < c0.size(); ++i) CHECK(std::abs(s.c.values()[i]) < std::abs(c0[i]) + t);
    }
  }
}

TEST_CASE("layer unrolling") {
  Rng rng(3);
  const LSTMCellParams p = LSTMCellParams::uniform(3, 4, rng);
  const Tensor x = random_tensor({2, 1, 3}, rng);
  const LSTMState init{random_tensor({2, 4}, rng), random_tensor({2, 4}, rng)};
  const LayerOutput one = lstm_layer_forward(p, x, init, false);
  const LSTMState step = lstm_cell_forward(p, ops::reshape(x, {2, 3}), init);
  CHECK(to_vector(one.outputs) == to_vector(step.h));
  CHECK(to_vector(one.last.c) == to_vector(step.c));

  const LayerOutput zero = lstm_layer_forward(LSTMCellParams::zeros(3, 4), random_tensor({2, 5, 3}, rng),
                                              LSTMState::zeros(2, 4), false);
  for (double v : zero.outputs.values()) CHECK(v == 0.0);
  for (double v : zero.last.c.values()) CHECK(v == 0.0);
}

TEST_CASE("reverse pass equals forward pass on flipped time") {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const LSTMCellParams p = LSTMCellParams::uniform(3, 4, rng);
    const Tensor x = random_tensor({2, 2 + uniform_index(rng, 5), 3}, rng);
    const LSTMState init = LSTMState::zeros(2, 4);
    const LayerOutput rev = lstm_layer_forward(p, x, init, true);
    const LayerOutput fwd = lstm_layer_forward(p, flip_time(x), init, false);
    CHECK(to_vector(rev.outputs) == to_vector(flip_time(fwd.outputs)));
    CHECK(to_vector(rev.last.h) == to_vector(fwd.last.h));
  }
}

TEST_CASE("block combination and shapes") {
  Rng rng(5);
  LSTMBlockParams bi = LSTMBlockParams::uniform(3, 6, 3, true, rng);
  const Tensor x = random_tensor({2, 4, 3}, rng);
  const BlockOutput out = lstm_block_forward(bi, x, BlockStates::zeros(bi, 2));
  CHECK(out.outputs.shape() == Shape{2, 4, 6});
  CHECK(out.last.forward.size() == 3);
  CHECK(out.last.backward.size() == 3);

  for (auto& layer : bi.backward) {
    for (const Tensor& t : {layer.w_forget, layer.w_input, layer.w_cell, layer.w_output, layer.b_forget,
                            layer.b_input, layer.b_cell, layer.b_output}) {
      fill(t, 0.0);
    }
  }
  LSTMBlockParams uni{bi.forward, {}};
  const BlockOutput a = lstm_block_forward(bi, x, BlockStates::zeros(bi, 2));
  const BlockOutput b = lstm_block_forward(uni, x, BlockStates::zeros(uni, 2));
  CHECK(to_vector(a.outputs) == to_vector(b.outputs));

  LSTMBlockParams zero = LSTMBlockParams::uniform(3, 6, 3, true, rng);
  for (auto* dir : {&zero.forward, &zero.backward}) {
    for (auto& layer : *dir) {
      for (const Tensor& t : {layer.w_forget, layer.w_input, layer.w_cell, layer.w_output, layer.b_forget,
                              layer.b_input, layer.b_cell, layer.b_output}) {
        fill(t, 0.0);
      }
    }
  }
  for (double v : to_vector(lstm_block_forward(zero, x, BlockStates::zeros(zero, 2)).outputs)) CHECK(v == 0.0);

  LSTMBlockParams bad = LSTMBlockParams::uniform(3, 6, 2, false, rng);
  bad.forward[1] = LSTMCellParams::uniform(6, 5, rng);
  CHECK_THROWS(lstm_block_forward(bad, x, BlockStates::zeros(LSTMBlockParams::uniform(3, 6, 2, false, rng), 2)));
}

TEST_CASE("full-size block keeps the hidden width") {
  Rng rng(6);
  const LSTMBlockParams p = LSTMBlockParams::uniform(20, 512, 1, true, rng);
  const BlockOutput out = lstm_block_forward(p, random_tensor({1, 2, 20}, rng), BlockStates::zeros(p, 1));
  CHECK(out.outputs.shape() == Shape{1, 2, 512});
}

TEST_CASE("linear layer") {
  Linear id{Tensor::from({2, 2}, {1, 0, 0, 1}), Tensor::zeros({2})};
  const Tensor x = Tensor::from({1, 2}, {3, -4});
  CHECK(to_vector(linear_forward(id, x)) == to_vector(x));
  Rng rng(7);
  CHECK(linear_forward(Linear::uniform(512, 256, rng), Tensor::zeros({1, 512})).shape() == Shape{1, 256});
  CHECK(linear_forward(Linear::uniform(256, 101, rng), Tensor::zeros({1, 256})).shape() == Shape{1, 101});
  CHECK_THROWS_AS(linear_forward(id, Tensor::zeros({1, 3})), DimensionError);
  Linear l = Linear::uniform(8, 3, rng);
  Tensor in = random_tensor({4, 8}, rng);
  CHECK(grad_check([&]() { return ops::sum_all(ops::tanh(linear_forward(l, in))); }, {l.weight, l.bias, in}) < 1e-6);
}

TEST_CASE("batchnorm statistics") {
  BatchNorm bn = BatchNorm::create(3);
  const Tensor constant = Tensor::full({2, 4, 3}, 7.0);
  for (double v : to_vector(batchnorm_forward(bn, constant, Mode::training))) CHECK(std::abs(v) <= 1e-3);

  Rng rng(8);
  BatchNorm fresh = BatchNorm::create(3);
  const Tensor x = random_tensor({4, 5, 3}, rng, -3, 5);
  const Tensor y = batchnorm_forward(fresh, x, Mode::training);
  for (std::size_t f = 0; f < 3; ++f) {
    double mean = 0, sq = 0;
    for (std::size_t i = 0; i < 20; ++i) mean += y.values()[i * 3 + f];
    mean /= 20;
    for (std::size_t i = 0; i < 20; ++i) sq += std::pow(y.values()[i * 3 + f] - mean, 2);
    CHECK(std::abs(mean) <= 1e-6);
    CHECK(std::abs(sq / 20 - 1.0) <= 1e-3);
  }

  BatchNorm affine = BatchNorm::create(3);
  fill(affine.gamma, 2.0);
  fill(affine.beta, 3.0);
  const Tensor z = batchnorm_forward(affine, y, Mode::training);
  for (std::size_t f = 0; f < 3; ++f) {
    double mean = 0, sq = 0;
    for (std::size_t i = 0; i < 20; ++i) mean += z.values()[i * 3 + f];
    mean /= 20;
    for (std::size_t i = 0; i < 20; ++i) sq += std::pow(z.values()[i * 3 + f] - mean, 2);
    CHECK(mean == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(std::sqrt(sq / 20) == doctest::Approx(2.0).epsilon(1e-3));
  }
}

TEST_CASE("batchnorm running statistics and modes") {
  BatchNorm bn = BatchNorm::create(1, 0.1, 1e-5);
  const Tensor x = Tensor::from({2, 2, 1}, {1, 2, 3, 4});
  batchnorm_forward(bn, x, Mode::training);
  CHECK(bn.running_mean.item() == doctest::Approx(0.25).epsilon(1e-12));
  // Unbiased variance of {1,2,3,4} is 5/3.
  CHECK(bn.running_var.item() == doctest::Approx(0.9 + 0.1 * 5.0 / 3.0).epsilon(1e-12));
  const Tensor inf = batchnorm_forward(bn, x, Mode::inference);
  CHECK(inf.values()[0] == doctest::Approx((1 - 0.25) / std::sqrt(bn.running_var.item() + 1e-5)));
  CHECK(bn.running_mean.item() == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_THROWS_AS(batchnorm_forward(bn, Tensor::zeros({1, 1, 1}), Mode::training), DataError);
  for (double v : bn.running_var.values()) CHECK(v >= 0.0);
}

TEST_CASE("temporal max pooling") {
  const Tensor x = Tensor::from({1, 4, 1}, {1, 3, 2, 5});
  CHECK(to_vector(maxpool_time(x, 2, 2)) == std::vector<double>{3, 5});
  Rng rng(9);
  const Tensor r = random_tensor({2, 7, 3}, rng);
  CHECK(to_vector(maxpool_time(r, 1, 1)) == to_vector(r));
  CHECK_THROWS_AS(maxpool_time(Tensor::zeros({1, 2, 1}), 3, 1), DimensionError);

  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + uniform_index(rng, 4), s = 1 + uniform_index(rng, 3);
    const std::size_t t = k + uniform_index(rng, 8);
    const Tensor in = random_tensor({2, t, 2}, rng);
    const Tensor out = maxpool_time(in, k, s);
    REQUIRE(out.dim(1) == (t - k) / s + 1);
    REQUIRE(pooled_length(t, k, s) == out.dim(1));
    for (std::size_t b = 0; b < 2; ++b) {
      for (std::size_t w = 0; w < out.dim(1); ++w) {
        for (std::size_t f = 0; f < 2; ++f) {
          for (std::size_t j = 0; j < k; ++j) CHECK(out.at({b, w, f}) >= in.at({b, w * s + j, f}));
        }
      }
    }
  }
}

TEST_CASE("maxpool routes gradient to the first maximum") {
  Tensor x = Tensor::from({1, 4, 1}, {2, 2, 1, 4}, true);
  Tape tape;
  {
    TapeScope scope(&tape);
    backward(ops::sum_all(maxpool_time(x, 2, 2)), tape);
  }
  CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{1, 0, 0, 1});
}

TEST_CASE("dropout") {
  Rng rng(10);
  const Tensor x = random_tensor({3, 4}, rng);
  CHECK(to_vector(dropout_forward(x, 0.5, Mode::inference, rng)) == to_vector(x));
  CHECK(to_vector(dropout_forward(x, 0.0, Mode::training, rng)) == to_vector(x));
  CHECK(to_vector(dropout_forward(x, 0.0, Mode::inference, rng)) == to_vector(x));
  CHECK_THROWS_AS(dropout_forward(x, 1.0, Mode::training, rng), ConfigError);
  CHECK_THROWS_AS(dropout_forward(x, -0.1, Mode::training, rng), ConfigError);

  const Tensor ones = Tensor::full({100000}, 1.0);
  const Tensor d = dropout_forward(ones, 0.5, Mode::training, rng);
  std::size_t survivors = 0;
  double sum = 0;
  for (double v : d.values()) {
    survivors += v != 0.0;
    sum += v;
    CHECK((v == 0.0 || v == 2.0));
  }
  CHECK(std::abs(static_cast<double>(survivors) / 1e5 - 0.5) <= 0.01);
  CHECK(std::abs(sum / 1e5 - 1.0) <= 0.02);
}

TEST_CASE("junction composites") {
  Rng rng(11);
  JunctionConfig cfg;
  cfg.pool_enabled = false;
  BatchNorm bn1 = BatchNorm::create(3), bn2 = BatchNorm::create(3);
  const Tensor pos = random_tensor({2, 6, 3}, rng, 0.1, 2.0);
  CHECK(to_vector(junction_forward(cfg, bn1, pos, Mode::training)) ==
        to_vector(batchnorm_forward(bn2, pos, Mode::training)));

  JunctionConfig pooled;
  BatchNorm bn3 = BatchNorm::create(3);
  CHECK(junction_forward(pooled, bn3, random_tensor({2, 8, 3}, rng), Mode::training).shape() == Shape{2, 4, 3});
  CHECK_THROWS_AS(junction_forward(pooled, bn3, random_tensor({2, 1, 3}, rng), Mode::training), DimensionError);

  const Tensor mixed = random_tensor({2, 6, 3}, rng);
  JunctionConfig a, b;
  b.order = JunctionOrder::bn_then_relu;
  BatchNorm bna = BatchNorm::create(3), bnb = BatchNorm::create(3);
  CHECK(to_vector(junction_forward(a, bna, mixed, Mode::training)) !=
        to_vector(junction_forward(b, bnb, mixed, Mode::training)));

  JunctionConfig invalid;
  invalid.pool_kernel = 0;
  CHECK_THROWS_AS(invalid.validate(), ConfigError);
}

TEST_CASE("parameter naming") {
  Rng rng(12);
  const LSTMBlockParams p = LSTMBlockParams::uniform(3, 4, 2, true, rng);
  std::vector<NamedTensor> named;
  p.append_named("block0", named);
  CHECK(named.size() == 2 * 2 * 8);
  CHECK(named.front().name == "block0.layer0.fwd.w_forget");
  CHECK(named.back().name == "block0.layer1.bwd.b_output");
}
