// SPDX-License-Identifier: Apache-2.0
//
// Sequence classifiers: the Context-LSTM cascade and the stacked-LSTM
// baseline, plus the parameter and FLOP accounting used to compare them.
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ctxlstm/layers.hpp"

namespace ctxlstm {

enum class Readout { last_step, mean_over_time };

struct ContextLSTMConfig {
  std::size_t input_dim = 512;
  std::size_t hidden = 512;
  std::size_t blocks = 3;
  std::size_t layers_per_block = 3;
  bool bidirectional = true;
  JunctionConfig junction;
  double dropout_rate = 0.3;
  std::size_t fc1_out = 256;
  std::size_t num_classes = 101;
  Readout readout = Readout::last_step;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  void validate() const;
};

struct BaselineConfig {
  std::size_t input_dim = 512;
  std::size_t hidden = 512;
  std::size_t layers = 3;
  double dropout_rate = 0.3;
  std::size_t fc1_out = 256;
  std::size_t num_classes = 101;
  Readout readout = Readout::last_step;

  void validate() const;
};

// FC1 -> ReLU -> dropout -> FC2.
struct ClassifierHead {
  Linear fc1;
  Linear fc2;
  double dropout_rate = 0.0;

  static ClassifierHead uniform(std::size_t in, std::size_t fc1_out, std::size_t classes,
                                double dropout_rate, Rng& rng);
  Tensor forward(const Tensor& features, Mode mode, Rng& rng) const;
  std::size_t param_count() const { return fc1.param_count() + fc2.param_count(); }
  void append_named(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

// Reduces a [batch, time, features] sequence to [batch, features].
Tensor readout(const Tensor& seq, Readout how);

class SequenceClassifier {
 public:
  virtual ~SequenceClassifier() = default;

  // Raw logits [batch, num_classes].
  virtual Tensor forward(const Tensor& seq, Mode mode, Rng& rng) = 0;

  // Learnable tensors in a stable order.
  virtual std::vector<NamedTensor> parameters() const = 0;
  // Non-learnable state (BatchNorm running statistics).
  virtual std::vector<NamedTensor> buffers() const = 0;

  virtual std::size_t input_dim() const = 0;
  virtual std::size_t num_classes() const = 0;
  virtual std::size_t min_sequence_length() const = 0;
  virtual std::string kind() const = 0;

  // Multiply-accumulate style cost of one forward pass for batch 1.
  virtual double flop_estimate(std::size_t time) const = 0;

  std::size_t count_params() const;
};

// Observation points inside ContextLSTM::forward. on_block_states may edit
// the states before they seed the next block.
struct ForwardHooks {
  std::function<void(std::size_t block, BlockStates& states)> on_block_states;
  std::function<void(std::size_t block, const Tensor& outputs)> on_block_outputs;
};

class ContextLSTM final : public SequenceClassifier {
 public:
  ContextLSTM(ContextLSTMConfig cfg, Rng& init_rng);

  Tensor forward(const Tensor& seq, Mode mode, Rng& rng) override;
  Tensor forward(const Tensor& seq, Mode mode, Rng& rng, const ForwardHooks& hooks);

  std::vector<NamedTensor> parameters() const override;
  std::vector<NamedTensor> buffers() const override;
  std::size_t input_dim() const override { return cfg_.input_dim; }
  std::size_t num_classes() const override { return cfg_.num_classes; }
  std::size_t min_sequence_length() const override;
  std::string kind() const override { return "context-lstm"; }
  double flop_estimate(std::size_t time) const override;

  // Input length seen by each block.
  std::vector<std::size_t> block_lengths(std::size_t time) const;

  const ContextLSTMConfig& config() const { return cfg_; }
  std::vector<LSTMBlockParams>& blocks() { return blocks_; }
  std::vector<BatchNorm>& junction_norms() { return norms_; }
  ClassifierHead& head() { return head_; }

 private:
  ContextLSTMConfig cfg_;
  std::vector<LSTMBlockParams> blocks_;
  std::vector<BatchNorm> norms_;  // one per junction, blocks - 1 in total
  ClassifierHead head_;
};

class BaselineLSTM final : public SequenceClassifier {
 public:
  BaselineLSTM(BaselineConfig cfg, Rng& init_rng);

  Tensor forward(const Tensor& seq, Mode mode, Rng& rng) override;
  std::vector<NamedTensor> parameters() const override;
  std::vector<NamedTensor> buffers() const override { return {}; }
  std::size_t input_dim() const override { return cfg_.input_dim; }
  std::size_t num_classes() const override { return cfg_.num_classes; }
  std::size_t min_sequence_length() const override { return 1; }
  std::string kind() const override { return "baseline"; }
  double flop_estimate(std::size_t time) const override;

  const BaselineConfig& config() const { return cfg_; }
  LSTMBlockParams& stack() { return stack_; }
  ClassifierHead& head() { return head_; }

 private:
  BaselineConfig cfg_;
  LSTMBlockParams stack_;
  ClassifierHead head_;
};

enum class ModelKind { context_lstm, baseline };

struct ModelSpec {
  ModelKind kind = ModelKind::context_lstm;
  ContextLSTMConfig context;
  BaselineConfig baseline;
};

std::unique_ptr<SequenceClassifier> make_model(const ModelSpec& spec, Rng& init_rng);

// Copies values by parameter name; throws DimensionError when a name is
// missing or shapes differ.
void copy_parameters(const SequenceClassifier& from, SequenceClassifier& to);

// Closed-form accounting pieces.
std::size_t lstm_direction_layer_params(std::size_t input, std::size_t hidden);
// 8*hidden*(input+hidden) for the four gate products plus 10*hidden elementwise.
double lstm_step_flops(std::size_t input, std::size_t hidden);
// 2*in*out + out.
double linear_flops(std::size_t in, std::size_t out);
double head_flops(std::size_t in, std::size_t fc1_out, std::size_t classes);

}  // namespace ctxlstm
