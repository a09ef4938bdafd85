// SPDX-License-Identifier: Apache-2.0
#include "ctxlstm/errors.hpp"
#include "ctxlstm/model.hpp"

namespace ctxlstm {

void BaselineConfig::validate() const {
  if (layers < 1) throw ConfigError("baseline: layers must be >= 1");
  if (hidden < 1 || input_dim < 1 || fc1_out < 1) throw ConfigError("baseline: widths must be >= 1");
  if (num_classes < 2) throw ConfigError("baseline: num_classes must be >= 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("baseline: dropout must lie in [0, 1)");
}

BaselineLSTM::BaselineLSTM(BaselineConfig cfg, Rng& init_rng) : cfg_(std::move(cfg)) {
  cfg_.validate();
  stack_ = LSTMBlockParams::uniform(cfg_.input_dim, cfg_.hidden, cfg_.layers, false, init_rng);
  head_ = ClassifierHead::uniform(cfg_.hidden, cfg_.fc1_out, cfg_.num_classes, cfg_.dropout_rate, init_rng);
}

Tensor BaselineLSTM::forward(const Tensor& seq, Mode mode, Rng& rng) {
  if (seq.rank() != 3 || seq.dim(2) != cfg_.input_dim) {
    throw DimensionError("baseline: expected input [batch,time," + std::to_string(cfg_.input_dim) +
                         "], found " + shape_str(seq.shape()));
  }
  BlockOutput out = lstm_block_forward(stack_, seq, BlockStates::zeros(stack_, seq.dim(0)));
  return head_.forward(readout(out.outputs, cfg_.readout), mode, rng);
}

std::vector<NamedTensor> BaselineLSTM::parameters() const {
  std::vector<NamedTensor> out;
  stack_.append_named("block0", out);
  head_.append_named("head", out);
  return out;
}

double BaselineLSTM::flop_estimate(std::size_t time) const {
  double total = 0.0;
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const std::size_t in = l == 0 ? cfg_.input_dim : cfg_.hidden;
    total += static_cast<double>(time) * lstm_step_flops(in, cfg_.hidden);
  }
  if (cfg_.readout == Readout::mean_over_time) total += static_cast<double>(time * cfg_.hidden);
  return total + head_flops(cfg_.hidden, cfg_.fc1_out, cfg_.num_classes);
}

}  // namespace ctxlstm
