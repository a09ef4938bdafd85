// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "ctxlstm/errors.hpp"
#include "ctxlstm/layers.hpp"
#include "ctxlstm/ops.hpp"

namespace ctxlstm {
namespace {

Tensor uniform_tensor(Shape shape, double k, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (double& v : t.mutable_values()) v = uniform(rng, -k, k);
  return t;
}

}  // namespace

LSTMCellParams LSTMCellParams::zeros(std::size_t input, std::size_t hidden) {
  const Shape w{hidden, hidden + input};
  const Shape b{hidden};
  return {Tensor::zeros(w, true), Tensor::zeros(w, true), Tensor::zeros(w, true), Tensor::zeros(w, true),
          Tensor::zeros(b, true), Tensor::zeros(b, true), Tensor::zeros(b, true), Tensor::zeros(b, true)};
}

LSTMCellParams LSTMCellParams::uniform(std::size_t input, std::size_t hidden, Rng& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden));
  const Shape w{hidden, hidden + input};
  const Shape b{hidden};
  LSTMCellParams p;
  p.w_forget = uniform_tensor(w, k, rng);
  p.w_input = uniform_tensor(w, k, rng);
  p.w_cell = uniform_tensor(w, k, rng);
  p.w_output = uniform_tensor(w, k, rng);
  p.b_forget = uniform_tensor(b, k, rng);
  p.b_input = uniform_tensor(b, k, rng);
  p.b_cell = uniform_tensor(b, k, rng);
  p.b_output = uniform_tensor(b, k, rng);
  return p;
}

std::size_t LSTMCellParams::param_count() const {
  return 4 * (w_forget.numel() + b_forget.numel());
}

void LSTMCellParams::append_named(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".w_forget", w_forget});
  out.push_back({prefix + ".w_input", w_input});
  out.push_back({prefix + ".w_cell", w_cell});
  out.push_back({prefix + ".w_output", w_output});
  out.push_back({prefix + ".b_forget", b_forget});
  out.push_back({prefix + ".b_input", b_input});
  out.push_back({prefix + ".b_cell", b_cell});
  out.push_back({prefix + ".b_output", b_output});
}

LSTMState LSTMState::zeros(std::size_t batch, std::size_t hidden) {
  return {Tensor::zeros({batch, hidden}), Tensor::zeros({batch, hidden})};
}

LSTMState lstm_cell_forward(const LSTMCellParams& p, const Tensor& x, const LSTMState& prev) {
  const std::size_t hidden = p.hidden();
  if (x.rank() != 2 || x.dim(1) != p.input()) {
    throw DimensionError("lstm cell: input " + shape_str(x.shape()) + " does not match input size " +
                         std::to_string(p.input()));
  }
  const Shape state_shape{x.dim(0), hidden};
  if (prev.h.shape() != state_shape || prev.c.shape() != state_shape) {
    throw DimensionError("lstm cell: state shapes " + shape_str(prev.h.shape()) + "/" +
                         shape_str(prev.c.shape()) + " do not match " + shape_str(state_shape));
  }
  const Tensor joined = ops::concat_last(prev.h, x);
  const Tensor forget = ops::sigmoid(ops::affine(joined, p.w_forget, p.b_forget));
  const Tensor input = ops::sigmoid(ops::affine(joined, p.w_input, p.b_input));
  const Tensor candidate = ops::tanh(ops::affine(joined, p.w_cell, p.b_cell));
  const Tensor cell = ops::add(ops::mul(forget, prev.c), ops::mul(input, candidate));
  const Tensor output = ops::sigmoid(ops::affine(joined, p.w_output, p.b_output));
  return {ops::mul(output, ops::tanh(cell)), cell};
}

LayerOutput lstm_layer_forward(const LSTMCellParams& p, const Tensor& seq, const LSTMState& init,
                               bool reverse) {
  if (seq.rank() != 3) throw DimensionError("lstm layer: expected [batch,time,input], got " + shape_str(seq.shape()));
  const std::size_t time = seq.dim(1);
  std::vector<Tensor> outputs(time);
  LSTMState state = init;
  for (std::size_t step = 0; step < time; ++step) {
    const std::size_t t = reverse ? time - 1 - step : step;
    state = lstm_cell_forward(p, ops::select(seq, 1, t), state);
    outputs[t] = state.h;
  }
  return {ops::stack(outputs, 1), state};
}

LSTMBlockParams LSTMBlockParams::uniform(std::size_t input, std::size_t hidden, std::size_t layers,
                                         bool bidirectional, Rng& rng) {
  LSTMBlockParams p;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = l == 0 ? input : hidden;
    p.forward.push_back(LSTMCellParams::uniform(in, hidden, rng));
    if (bidirectional) p.backward.push_back(LSTMCellParams::uniform(in, hidden, rng));
  }
  return p;
}

std::size_t LSTMBlockParams::param_count() const {
  std::size_t n = 0;
  for (const auto& c : forward) n += c.param_count();
  for (const auto& c : backward) n += c.param_count();
  return n;
}

void LSTMBlockParams::append_named(const std::string& prefix, std::vector<NamedTensor>& out) const {
  for (std::size_t l = 0; l < forward.size(); ++l) {
    forward[l].append_named(prefix + ".layer" + std::to_string(l) + ".fwd", out);
    if (bidirectional()) backward[l].append_named(prefix + ".layer" + std::to_string(l) + ".bwd", out);
  }
}

BlockStates BlockStates::zeros(const LSTMBlockParams& p, std::size_t batch) {
  BlockStates s;
  for (std::size_t l = 0; l < p.layers(); ++l) {
    s.forward.push_back(LSTMState::zeros(batch, p.forward[l].hidden()));
    if (p.bidirectional()) s.backward.push_back(LSTMState::zeros(batch, p.backward[l].hidden()));
  }
  return s;
}

BlockOutput lstm_block_forward(const LSTMBlockParams& p, const Tensor& seq, const BlockStates& init) {
  if (p.forward.empty()) throw DimensionError("lstm block: no layers");
  if (p.bidirectional() && p.backward.size() != p.forward.size()) {
    throw DimensionError("lstm block: forward and backward layer counts differ");
  }
  const std::size_t hidden = p.hidden();
  for (std::size_t l = 0; l < p.layers(); ++l) {
    const bool bad_fwd = p.forward[l].hidden() != hidden;
    const bool bad_bwd = p.bidirectional() && p.backward[l].hidden() != hidden;
    const bool bad_in = l > 0 && (p.forward[l].input() != hidden ||
                                  (p.bidirectional() && p.backward[l].input() != hidden));
    if (bad_fwd || bad_bwd || bad_in) {
      throw DimensionError("lstm block: inconsistent hidden sizes at layer " + std::to_string(l));
    }
  }
  if (init.forward.size() != p.layers() || init.backward.size() != p.backward.size()) {
    throw DimensionError("lstm block: initial state count does not match layer count");
  }

  BlockOutput result;
  Tensor current = seq;
  for (std::size_t l = 0; l < p.layers(); ++l) {
    LayerOutput fwd = lstm_layer_forward(p.forward[l], current, init.forward[l], false);
    result.last.forward.push_back(fwd.last);
    if (p.bidirectional()) {
      LayerOutput bwd = lstm_layer_forward(p.backward[l], current, init.backward[l], true);
      result.last.backward.push_back(bwd.last);
      current = ops::add(fwd.outputs, bwd.outputs);
    } else {
      current = fwd.outputs;
    }
  }
  result.outputs = current;
  return result;
}

}  // namespace ctxlstm
