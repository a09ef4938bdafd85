// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <chrono>
#include <cmath>

#include "ctxlstm/errors.hpp"
#include "ctxlstm/ops.hpp"
#include "ctxlstm/tape.hpp"
#include "ctxlstm/training.hpp"

namespace ctxlstm {
namespace {

void check_compatible(const SequenceClassifier& model, const Dataset& data, const char* which, std::size_t window) {
  if (data.items.empty()) throw DataError(std::string(which) + " dataset is empty");
  if (data.dim != model.input_dim()) {
    throw DataError(std::string(which) + " dataset has feature dim " + std::to_string(data.dim) +
                    ", model expects " + std::to_string(model.input_dim()));
  }
  if (data.num_classes() != model.num_classes()) {
    throw DataError(std::string(which) + " dataset has " + std::to_string(data.num_classes()) +
                    " classes, model expects " + std::to_string(model.num_classes()));
  }
  if (window < model.min_sequence_length()) {
    throw ConfigError("time window " + std::to_string(window) + " is shorter than the model minimum of " +
                      std::to_string(model.min_sequence_length()));
  }
}

constexpr std::uint64_t kDropoutStream = 0x44524F50ULL;  // "DROP"

}  // namespace

EvalResult evaluate(SequenceClassifier& model, const Dataset& data, std::size_t batch_size, std::size_t window) {
  TapeScope no_tape(nullptr);
  Rng unused(0);
  EvalResult result;
  result.predictions.assign(data.size(), 0);
  std::size_t correct = 0;
  for (const auto& batch : make_batches(data, batch_size, window, 0, 0, Sampling::evaluation)) {
    const Tensor logits = model.forward(batch.features, Mode::inference, unused);
    const auto pred = ops::argmax_last(logits);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      result.predictions[batch.indices[i]] = pred[i];
      correct += pred[i] == batch.labels[i] ? 1 : 0;
    }
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return result;
}

Trainer::Trainer(SequenceClassifier& model, const Dataset& train, const Dataset& test, TrainConfig cfg)
    : model_(model), train_(train), test_(test), cfg_(cfg), rng_(derive_seed(cfg.seed, kDropoutStream)) {
  cfg_.validate();
  check_compatible(model_, train_, "training", cfg_.time_window);
  check_compatible(model_, test_, "test", cfg_.time_window);
  params_ = model_.parameters();
  for (auto& p : params_) p.tensor.clear_grad();
  adam_ = AdamState::for_params(params_);
}

EpochRecord Trainer::run_epoch() {
  const auto started = std::chrono::steady_clock::now();
  double loss_sum = 0.0;
  double acc_sum = 0.0;
  std::size_t seen = 0;
  for (const auto& batch :
       make_batches(train_, cfg_.batch_size, cfg_.time_window, cfg_.seed, epoch_, Sampling::training)) {
    Tape tape;
    TapeScope scope(&tape);
    const Tensor logits = model_.forward(batch.features, Mode::training, rng_);
    const Tensor loss = cross_entropy(logits, batch.labels);
    if (!std::isfinite(loss.item())) {
      throw NumericError("training loss became non-finite at epoch " + std::to_string(epoch_ + 1));
    }
    backward(loss, tape);
    adam_step(params_, adam_, cfg_);
    const auto n = static_cast<double>(batch.labels.size());
    loss_sum += loss.item() * n;
    acc_sum += top1_accuracy(logits, batch.labels) * n;
    seen += batch.labels.size();
  }
  epoch_ += 1;
  if (epoch_ % cfg_.eval_every == 0 || epoch_ == cfg_.epochs) {
    last_test_acc_ = evaluate(model_, test_, cfg_.batch_size, cfg_.time_window).accuracy;
    best_test_acc_ = std::max(best_test_acc_, last_test_acc_);
  }
  EpochRecord r;
  r.epoch = epoch_;
  r.train_loss = loss_sum / static_cast<double>(seen);
  r.train_acc = acc_sum / static_cast<double>(seen);
  r.test_acc = last_test_acc_;
  if (cfg_.record_wall_time) {
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  }
  return r;
}

std::vector<EpochRecord> Trainer::run(MetricSink* sink, std::size_t until,
                                      const std::function<void(const EpochRecord&)>& on_epoch) {
  const std::size_t target = until == 0 ? cfg_.epochs : std::min(until, cfg_.epochs);
  std::vector<EpochRecord> records;
  while (epoch_ < target) {
    records.push_back(run_epoch());
    if (sink) sink->append(records.back());
    if (on_epoch) on_epoch(records.back());
  }
  return records;
}

Checkpoint Trainer::checkpoint(std::string model_config) const {
  Checkpoint c;
  c.model_config = std::move(model_config);
  c.train = cfg_;
  for (const auto& p : model_.parameters()) c.parameters.push_back({p.name, p.tensor.clone()});
  for (const auto& b : model_.buffers()) c.buffers.push_back({b.name, b.tensor.clone()});
  c.adam = adam_;
  c.epoch = epoch_;
  c.rng = rng_state(rng_);
  c.best_test_acc = best_test_acc_;
  c.last_test_acc = last_test_acc_;
  return c;
}

void Trainer::restore(const Checkpoint& ckpt) {
  if (ckpt.adam.m.size() != params_.size() || ckpt.adam.v.size() != params_.size()) {
    throw DataError("checkpoint optimizer state does not match the model");
  }
  for (std::size_t k = 0; k < params_.size(); ++k) {
    if (ckpt.adam.m[k].size() != params_[k].tensor.numel() || ckpt.adam.v[k].size() != params_[k].tensor.numel()) {
      throw DataError("checkpoint optimizer moments for '" + params_[k].name + "' have the wrong size");
    }
  }
  Rng restored;
  set_rng_state(restored, ckpt.rng);
  apply_checkpoint_weights(ckpt, model_);
  adam_ = ckpt.adam;
  rng_ = restored;
  epoch_ = ckpt.epoch;
  best_test_acc_ = ckpt.best_test_acc;
  last_test_acc_ = ckpt.last_test_acc;
}

std::vector<EpochRecord> train(SequenceClassifier& model, const Dataset& train_set, const Dataset& test_set,
                               const TrainConfig& cfg, MetricSink* sink) {
  Trainer trainer(model, train_set, test_set, cfg);
  return trainer.run(sink);
}

}  // namespace ctxlstm
