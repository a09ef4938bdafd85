// SPDX-License-Identifier: Apache-2.0
//
// Network layers expressed through the autodiff ops: the LSTM cell and its
// unrolled, stacked and bidirectional forms, Linear, BatchNorm over
// features, temporal max pooling, inverted dropout and the inter-block
// junction.
#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "ctxlstm/random.hpp"
#include "ctxlstm/tensor.hpp"

namespace ctxlstm {

enum class Mode { training, inference };

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Weights of one direction of one LSTM layer. Each gate weight has shape
// [hidden, hidden + input] and multiplies the concatenation [h_prev, x].
struct LSTMCellParams {
  Tensor w_forget, w_input, w_cell, w_output;
  Tensor b_forget, b_input, b_cell, b_output;

  static LSTMCellParams zeros(std::size_t input, std::size_t hidden);
  // uniform(-k, k), k = 1/sqrt(hidden), for weights and biases alike.
  static LSTMCellParams uniform(std::size_t input, std::size_t hidden, Rng& rng);

  std::size_t hidden() const { return b_forget.dim(0); }
  std::size_t input() const { return w_forget.dim(1) - hidden(); }
  std::size_t param_count() const;

  void append_named(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

struct LSTMState {
  Tensor h;
  Tensor c;

  static LSTMState zeros(std::size_t batch, std::size_t hidden);
};

LSTMState lstm_cell_forward(const LSTMCellParams& p, const Tensor& x, const LSTMState& prev);

struct LayerOutput {
  Tensor outputs;  // [batch, time, hidden], original time order
  LSTMState last;  // state after the final processed step
};

// Unrolls the cell over seq[batch, time, input]; with reverse set, steps run
// from the last frame to the first.
LayerOutput lstm_layer_forward(const LSTMCellParams& p, const Tensor& seq, const LSTMState& init,
                               bool reverse);

// One stacked (optionally bidirectional) LSTM block. Directions are summed,
// so every layer emits hidden features.
struct LSTMBlockParams {
  std::vector<LSTMCellParams> forward;   // one per layer
  std::vector<LSTMCellParams> backward;  // empty for a unidirectional block

  static LSTMBlockParams uniform(std::size_t input, std::size_t hidden, std::size_t layers,
                                 bool bidirectional, Rng& rng);

  bool bidirectional() const { return !backward.empty(); }
  std::size_t layers() const { return forward.size(); }
  std::size_t hidden() const { return forward.front().hidden(); }
  std::size_t param_count() const;
  void append_named(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

// Per-layer states; backward is empty for unidirectional blocks.
struct BlockStates {
  std::vector<LSTMState> forward;
  std::vector<LSTMState> backward;

  static BlockStates zeros(const LSTMBlockParams& p, std::size_t batch);
};

struct BlockOutput {
  Tensor outputs;  // last layer, directions summed
  BlockStates last;
};

BlockOutput lstm_block_forward(const LSTMBlockParams& p, const Tensor& seq, const BlockStates& init);

struct Linear {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]

  // uniform(-k, k), k = 1/sqrt(in).
  static Linear uniform(std::size_t in, std::size_t out, Rng& rng);
  std::size_t in_features() const { return weight.dim(1); }
  std::size_t out_features() const { return weight.dim(0); }
  std::size_t param_count() const { return weight.numel() + bias.numel(); }
};

Tensor linear_forward(const Linear& layer, const Tensor& x);

// Per-feature normalization over every (batch, time) position.
struct BatchNorm {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  static BatchNorm create(std::size_t features, double momentum = 0.1, double eps = 1e-5);
  std::size_t features() const { return gamma.dim(0); }
};

// In training mode, normalizes with batch statistics (biased variance),
// differentiates through them and updates the running estimates (unbiased
// variance). Inference mode reads the running estimates only.
Tensor batchnorm_forward(BatchNorm& bn, const Tensor& x, Mode mode);

std::size_t pooled_length(std::size_t time, std::size_t kernel, std::size_t stride);

// Sliding max over the time axis of x[batch, time, features].
Tensor maxpool_time(const Tensor& x, std::size_t kernel, std::size_t stride);

// Inverted dropout. Consumes one uniform draw per element in training mode
// when rate > 0; no draws otherwise.
Tensor dropout_forward(const Tensor& x, double rate, Mode mode, Rng& rng);

enum class JunctionOrder { relu_then_bn, bn_then_relu };

struct JunctionConfig {
  JunctionOrder order = JunctionOrder::relu_then_bn;
  bool pool_enabled = true;
  std::size_t pool_kernel = 2;
  std::size_t pool_stride = 2;

  void validate() const;
};

Tensor junction_forward(const JunctionConfig& cfg, BatchNorm& bn, const Tensor& x, Mode mode);

}  // namespace ctxlstm
