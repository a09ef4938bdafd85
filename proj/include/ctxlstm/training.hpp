// SPDX-License-Identifier: Apache-2.0
//
// Loss, Adam, accuracy, the epoch loop, metric sinks and checkpoints.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ctxlstm/data.hpp"
#include "ctxlstm/model.hpp"
#include "ctxlstm/random.hpp"

namespace ctxlstm {

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 80;
  std::size_t epochs = 300;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 42;
  std::size_t eval_every = 1;
  std::size_t time_window = 32;
  // When false, wall_seconds is written as 0 so metric files are
  // reproducible byte for byte.
  bool record_wall_time = false;

  void validate() const;
};

// Mean over the batch of -log softmax(logits)[label]. Throws DataError
// naming the first sample whose label is out of range.
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> labels);

double top1_accuracy(const Tensor& logits, std::span<const std::size_t> labels);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;

  static AdamState for_params(std::span<const NamedTensor> params);
};

// One bias-corrected Adam update; gradients are cleared afterwards. Throws
// ContractError if any parameter has no gradient.
void adam_step(std::span<const NamedTensor> params, AdamState& state, const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  // Last evaluated test accuracy; epochs between evaluations repeat it.
  double test_acc = 0.0;
  double wall_seconds = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

class MetricSink {
 public:
  virtual ~MetricSink() = default;
  virtual void append(const EpochRecord& record) = 0;
};

// Append-only CSV with header epoch,train_loss,train_acc,test_acc,wall_seconds.
class CsvMetricSink final : public MetricSink {
 public:
  explicit CsvMetricSink(std::filesystem::path path);
  void append(const EpochRecord& record) override;
  static std::string header();
  static std::string format(const EpochRecord& record);

 private:
  std::filesystem::path path_;
};

class MemoryMetricSink final : public MetricSink {
 public:
  void append(const EpochRecord& record) override { records.push_back(record); }
  std::vector<EpochRecord> records;
};

struct Checkpoint {
  std::string model_config;  // opaque, typically JSON
  TrainConfig train;
  std::vector<NamedTensor> parameters;
  std::vector<NamedTensor> buffers;
  AdamState adam;
  std::uint64_t epoch = 0;  // completed epochs
  std::string rng;
  double best_test_acc = 0.0;
  double last_test_acc = 0.0;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt);
// Throws DataError on bad magic, version mismatch, truncation or checksum.
Checkpoint decode_checkpoint(std::span<const unsigned char> bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Writes values from ckpt into the model's parameters and buffers, checking
// names and shapes before anything is modified.
void apply_checkpoint_weights(const Checkpoint& ckpt, SequenceClassifier& model);

struct EvalResult {
  double accuracy = 0.0;
  std::vector<std::size_t> predictions;  // dataset order
};

// Inference-mode pass over every sample once, centered windows.
EvalResult evaluate(SequenceClassifier& model, const Dataset& data, std::size_t batch_size, std::size_t window);

class Trainer {
 public:
  Trainer(SequenceClassifier& model, const Dataset& train, const Dataset& test, TrainConfig cfg);

  // Trains one epoch and evaluates when scheduled (every eval_every epochs
  // and on the final epoch).
  EpochRecord run_epoch();

  // Runs until `until` epochs are complete (cfg.epochs when 0), appending
  // each record to sink. on_epoch, if set, runs after every epoch.
  std::vector<EpochRecord> run(MetricSink* sink, std::size_t until = 0,
                               const std::function<void(const EpochRecord&)>& on_epoch = {});

  Checkpoint checkpoint(std::string model_config) const;
  void restore(const Checkpoint& ckpt);

  std::uint64_t epoch() const { return epoch_; }
  double best_test_acc() const { return best_test_acc_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  SequenceClassifier& model_;
  const Dataset& train_;
  const Dataset& test_;
  TrainConfig cfg_;
  std::vector<NamedTensor> params_;
  AdamState adam_;
  Rng rng_;
  std::uint64_t epoch_ = 0;
  double best_test_acc_ = 0.0;
  double last_test_acc_ = 0.0;
};

std::vector<EpochRecord> train(SequenceClassifier& model, const Dataset& train_set, const Dataset& test_set,
                               const TrainConfig& cfg, MetricSink* sink);

}  // namespace ctxlstm
