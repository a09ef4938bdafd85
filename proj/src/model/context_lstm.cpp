// SPDX-License-Identifier: Apache-2.0
#include "ctxlstm/errors.hpp"
#include "ctxlstm/model.hpp"

namespace ctxlstm {

void ContextLSTMConfig::validate() const {
  if (blocks < 1) throw ConfigError("context-lstm: blocks must be >= 1");
  if (layers_per_block < 1) throw ConfigError("context-lstm: layers_per_block must be >= 1");
  if (hidden < 1 || input_dim < 1 || fc1_out < 1) throw ConfigError("context-lstm: widths must be >= 1");
  if (num_classes < 2) throw ConfigError("context-lstm: num_classes must be >= 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("context-lstm: dropout must lie in [0, 1)");
  junction.validate();
}

ContextLSTM::ContextLSTM(ContextLSTMConfig cfg, Rng& init_rng) : cfg_(std::move(cfg)) {
  cfg_.validate();
  for (std::size_t k = 0; k < cfg_.blocks; ++k) {
    const std::size_t in = k == 0 ? cfg_.input_dim : cfg_.hidden;
    blocks_.push_back(LSTMBlockParams::uniform(in, cfg_.hidden, cfg_.layers_per_block, cfg_.bidirectional, init_rng));
    if (k + 1 < cfg_.blocks) norms_.push_back(BatchNorm::create(cfg_.hidden, cfg_.bn_momentum, cfg_.bn_eps));
  }
  head_ = ClassifierHead::uniform(cfg_.hidden, cfg_.fc1_out, cfg_.num_classes, cfg_.dropout_rate, init_rng);
}

std::size_t ContextLSTM::min_sequence_length() const {
  if (!cfg_.junction.pool_enabled) return 1;
  std::size_t need = 1;
  for (std::size_t k = 1; k < cfg_.blocks; ++k) {
    need = (need - 1) * cfg_.junction.pool_stride + cfg_.junction.pool_kernel;
  }
  return need;
}

std::vector<std::size_t> ContextLSTM::block_lengths(std::size_t time) const {
  std::vector<std::size_t> lengths{time};
  for (std::size_t k = 1; k < cfg_.blocks; ++k) {
    const std::size_t prev = lengths.back();
    lengths.push_back(cfg_.junction.pool_enabled
                          ? pooled_length(prev, cfg_.junction.pool_kernel, cfg_.junction.pool_stride)
                          : prev);
  }
  return lengths;
}

Tensor ContextLSTM::forward(const Tensor& seq, Mode mode, Rng& rng) {
  return forward(seq, mode, rng, ForwardHooks{});
}

Tensor ContextLSTM::forward(const Tensor& seq, Mode mode, Rng& rng, const ForwardHooks& hooks) {
  if (seq.rank() != 3 || seq.dim(2) != cfg_.input_dim) {
    throw DimensionError("context-lstm: expected input [batch,time," + std::to_string(cfg_.input_dim) +
                         "], found " + shape_str(seq.shape()));
  }
  if (seq.dim(1) < min_sequence_length()) {
    throw DimensionError("context-lstm: sequence of length " + std::to_string(seq.dim(1)) +
                         " is too short for the pooling pyramid; need at least " +
                         std::to_string(min_sequence_length()) + " frames");
  }
  BlockStates states = BlockStates::zeros(blocks_.front(), seq.dim(0));
  Tensor input = seq;
  Tensor features;
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    BlockOutput out = lstm_block_forward(blocks_[k], input, states);
    if (hooks.on_block_outputs) hooks.on_block_outputs(k, out.outputs);
    if (hooks.on_block_states) hooks.on_block_states(k, out.last);
    // Final (h, c) of every layer and direction seed the next block.
    states = std::move(out.last);
    if (k + 1 < blocks_.size()) {
      input = junction_forward(cfg_.junction, norms_[k], out.outputs, mode);
      input = dropout_forward(input, cfg_.dropout_rate, mode, rng);
    } else {
      features = readout(out.outputs, cfg_.readout);
    }
  }
  return head_.forward(features, mode, rng);
}

std::vector<NamedTensor> ContextLSTM::parameters() const {
  std::vector<NamedTensor> out;
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    blocks_[k].append_named("block" + std::to_string(k), out);
    if (k < norms_.size()) {
      out.push_back({"junction" + std::to_string(k) + ".bn.gamma", norms_[k].gamma});
      out.push_back({"junction" + std::to_string(k) + ".bn.beta", norms_[k].beta});
    }
  }
  head_.append_named("head", out);
  return out;
}

std::vector<NamedTensor> ContextLSTM::buffers() const {
  std::vector<NamedTensor> out;
  for (std::size_t k = 0; k < norms_.size(); ++k) {
    out.push_back({"junction" + std::to_string(k) + ".bn.running_mean", norms_[k].running_mean});
    out.push_back({"junction" + std::to_string(k) + ".bn.running_var", norms_[k].running_var});
  }
  return out;
}

double ContextLSTM::flop_estimate(std::size_t time) const {
  const std::size_t h = cfg_.hidden;
  const double dirs = cfg_.bidirectional ? 2.0 : 1.0;
  const auto lengths = block_lengths(time);
  double total = 0.0;
  for (std::size_t k = 0; k < cfg_.blocks; ++k) {
    const double len = static_cast<double>(lengths[k]);
    for (std::size_t l = 0; l < cfg_.layers_per_block; ++l) {
      const std::size_t in = (k == 0 && l == 0) ? cfg_.input_dim : h;
      total += dirs * len * lstm_step_flops(in, h);
      if (cfg_.bidirectional) total += len * static_cast<double>(h);
    }
    if (k + 1 < cfg_.blocks) {
      total += 5.0 * len * static_cast<double>(h);  // relu + batchnorm
      if (cfg_.junction.pool_enabled) {
        total += static_cast<double>(lengths[k + 1] * cfg_.junction.pool_kernel * h);
      }
    }
  }
  if (cfg_.readout == Readout::mean_over_time) total += static_cast<double>(lengths.back() * h);
  return total + head_flops(h, cfg_.fc1_out, cfg_.num_classes);
}

}  // namespace ctxlstm
