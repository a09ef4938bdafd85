// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <optional>

#include "ctxlstm/errors.hpp"
#include "ctxlstm/grad_check.hpp"
#include "ctxlstm/model.hpp"
#include "ctxlstm/ops.hpp"
#include "ctxlstm/training.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace ctxlstm;
using test::random_tensor;
using test::to_vector;

namespace {

ContextLSTMConfig small_context() {
  ContextLSTMConfig c;
  c.input_dim = 5;
  c.hidden = 6;
  c.fc1_out = 7;
  c.num_classes = 4;
  return c;
}

std::string error_text(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("closed-form parameter counts") {
  CHECK(lstm_direction_layer_params(512, 512) == 2099200);
  Rng rng(1);
  CHECK(ClassifierHead::uniform(512, 256, 101, 0.3, rng).param_count() == 157285);
  {
    BaselineLSTM base(BaselineConfig{}, rng);
    CHECK(base.count_params() == 6454885);
  }
  {
    ContextLSTM ctx(ContextLSTMConfig{}, rng);
    CHECK(ctx.count_params() == 37944933);
    CHECK(ctx.flop_estimate(32) == 1411554405.0);
  }
}

TEST_CASE("closed-form FLOP estimates") {
  Rng rng(2);
  ContextLSTMConfig no_pool;
  no_pool.junction.pool_enabled = false;
  ContextLSTM ctx(no_pool, rng);
  CHECK(ctx.flop_estimate(32) == 2419493989.0);
  CHECK(1411554405.0 / ctx.flop_estimate(32) == doctest::Approx(0.583408932370776).epsilon(1e-12));

  BaselineConfig one;
  one.input_dim = 4;
  one.hidden = 8;
  one.layers = 1;
  one.fc1_out = 6;
  one.num_classes = 3;
  CHECK(BaselineLSTM(one, rng).flop_estimate(5) == 4387.0);
  CHECK(lstm_step_flops(4, 8) == 8.0 * 8 * 12 + 80);
  CHECK(linear_flops(8, 6) == 102.0);
}

TEST_CASE("default baseline FLOPs") {
  Rng rng(3);
  BaselineLSTM base(BaselineConfig{}, rng);
  CHECK(base.flop_estimate(32) == 403459173.0);
}

TEST_CASE("pooling always saves work once the pyramid has more than one block") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    ContextLSTMConfig c = small_context();
    c.blocks = 2 + uniform_index(rng, 3);
    c.hidden = 2 + uniform_index(rng, 8);
    ContextLSTM pooled(c, rng);
    c.junction.pool_enabled = false;
    ContextLSTM flat(c, rng);
    const std::size_t t = pooled.min_sequence_length() + uniform_index(rng, 40);
    CHECK(pooled.flop_estimate(t) < flat.flop_estimate(t));
  }
}

TEST_CASE("block lengths and minimum sequence length") {
  Rng rng(5);
  ContextLSTM m(small_context(), rng);
  CHECK(m.block_lengths(32) == std::vector<std::size_t>{32, 16, 8});
  CHECK(m.min_sequence_length() == 4);
  CHECK(m.forward(random_tensor({2, 4, 5}, rng), Mode::inference, rng).shape() == Shape{2, 4});

  const std::string short_msg = error_text([&] { m.forward(random_tensor({2, 3, 5}, rng), Mode::inference, rng); });
  CHECK(short_msg.find("at least 4") != std::string::npos);
  const std::string dim_msg = error_text([&] { m.forward(random_tensor({2, 8, 3}, rng), Mode::inference, rng); });
  CHECK(dim_msg.find("5") != std::string::npos);
  CHECK(dim_msg.find("[2,8,3]") != std::string::npos);
}

TEST_CASE("degenerate Context-LSTM equals the baseline bitwise") {
  ContextLSTMConfig c = small_context();
  c.blocks = 1;
  c.bidirectional = false;
  c.junction.pool_enabled = false;
  BaselineConfig b;
  b.input_dim = c.input_dim;
  b.hidden = c.hidden;
  b.layers = c.layers_per_block;
  b.fc1_out = c.fc1_out;
  b.num_classes = c.num_classes;
  Rng init(6);
  ContextLSTM ctx(c, init);
  BaselineLSTM base(b, init);
  copy_parameters(ctx, base);
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const Tensor x = random_tensor({1 + uniform_index(rng, 3), 1 + uniform_index(rng, 9), 5}, rng, -3, 3);
    const Mode mode = i % 2 ? Mode::training : Mode::inference;
    Rng d1(i), d2(i);
    CHECK(to_vector(ctx.forward(x, mode, d1)) == to_vector(base.forward(x, mode, d2)));
  }
}

TEST_CASE("final block states seed the next block") {
  ContextLSTMConfig c = small_context();
  c.dropout_rate = 0.0;
  c.blocks = 2;
  Rng init(8);
  ContextLSTM m(c, init);
  Rng rng(9);
  const Tensor x = random_tensor({2, 6, 5}, rng);

  std::vector<Tensor> outs;
  std::optional<BlockStates> first_states;
  ForwardHooks observe;
  observe.on_block_outputs = [&](std::size_t, const Tensor& o) { outs.push_back(o); };
  observe.on_block_states = [&](std::size_t k, BlockStates& s) {
    if (k == 0) first_states = s;
  };
  m.forward(x, Mode::inference, rng, observe);
  REQUIRE(outs.size() == 2);
  REQUIRE(first_states.has_value());

  const Tensor junction_in = junction_forward(c.junction, m.junction_norms()[0], outs[0], Mode::inference);
  const BlockOutput manual = lstm_block_forward(m.blocks()[1], junction_in, *first_states);
  CHECK(to_vector(manual.outputs) == to_vector(outs[1]));
  const BlockOutput cold =
      lstm_block_forward(m.blocks()[1], junction_in, BlockStates::zeros(m.blocks()[1], 2));
  CHECK(to_vector(cold.outputs) != to_vector(outs[1]));

  std::vector<Tensor> zeroed_outs;
  ForwardHooks zero;
  zero.on_block_states = [&](std::size_t, BlockStates& s) {
    for (auto* dir : {&s.forward, &s.backward}) {
      for (auto& st : *dir) st = LSTMState::zeros(st.h.dim(0), st.h.dim(1));
    }
  };
  zero.on_block_outputs = [&](std::size_t, const Tensor& o) { zeroed_outs.push_back(o); };
  m.forward(x, Mode::inference, rng, zero);
  CHECK(to_vector(zeroed_outs[1]) == to_vector(cold.outputs));
}

TEST_CASE("parameter and buffer naming") {
  Rng rng(10);
  ContextLSTM m(small_context(), rng);
  const auto params = m.parameters();
  CHECK(params.front().name == "block0.layer0.fwd.w_forget");
  CHECK(params.back().name == "head.fc2.bias");
  std::size_t total = 0;
  for (const auto& p : params) total += p.tensor.numel();
  CHECK(total == m.count_params());
  const auto buffers = m.buffers();
  REQUIRE(buffers.size() == 4);
  CHECK(buffers[0].name == "junction0.bn.running_mean");
  CHECK(buffers[3].name == "junction1.bn.running_var");
}

TEST_CASE("copy_parameters rejects mismatched models") {
  Rng rng(11);
  ContextLSTM a(small_context(), rng);
  ContextLSTMConfig other = small_context();
  other.hidden = 7;
  ContextLSTM b(other, rng);
  CHECK_THROWS_AS(copy_parameters(a, b), DimensionError);
}

TEST_CASE("make_model dispatches on kind") {
  Rng rng(12);
  ModelSpec spec;
  spec.context = small_context();
  spec.baseline.input_dim = 5;
  spec.baseline.hidden = 6;
  spec.baseline.fc1_out = 7;
  spec.baseline.num_classes = 4;
  CHECK(make_model(spec, rng)->kind() == "context-lstm");
  spec.kind = ModelKind::baseline;
  CHECK(make_model(spec, rng)->kind() == "baseline");
}

TEST_CASE("invalid configurations are rejected") {
  ContextLSTMConfig c = small_context();
  c.blocks = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_context();
  c.dropout_rate = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  BaselineConfig b;
  b.num_classes = 1;
  CHECK_THROWS_AS(b.validate(), ConfigError);
}

TEST_CASE("mean readout") {
  const Tensor seq = Tensor::from({1, 2, 2}, {1, 2, 3, 6});
  CHECK(to_vector(readout(seq, Readout::mean_over_time)) == std::vector<double>{2, 4});
  CHECK(to_vector(readout(seq, Readout::last_step)) == std::vector<double>{3, 6});
}

TEST_CASE("full-depth model gradients at a coarser step") {
  // Three layers per block; roundoff at eps 1e-5 swamps the smallest
  // components, so this depth is differenced at eps 1e-4.
  ContextLSTMConfig c;
  c.input_dim = 4;
  c.hidden = 4;
  c.fc1_out = 5;
  c.num_classes = 3;
  Rng rng(1000);
  ContextLSTM m(c, rng);
  const Tensor seq = random_tensor({2, 4, 4}, rng);
  const std::vector<std::size_t> labels{0, 2};
  std::vector<Tensor> leaves;
  for (const auto& p : m.parameters()) leaves.push_back(p.tensor);
  const double err = grad_check(
      [&]() {
        Rng drop(5);
        return cross_entropy(m.forward(seq, Mode::training, drop), labels);
      },
      leaves, 1e-4);
  CHECK(err <= 1e-4);
}
