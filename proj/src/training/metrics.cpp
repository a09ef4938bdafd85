// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <fstream>

#include "ctxlstm/errors.hpp"
#include "ctxlstm/training.hpp"

namespace ctxlstm {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (time_window < 1) throw ConfigError("time_window must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
}

CsvMetricSink::CsvMetricSink(std::filesystem::path path) : path_(std::move(path)) {
  std::error_code ec;
  const bool fresh = !std::filesystem::exists(path_, ec) || std::filesystem::file_size(path_, ec) == 0;
  if (fresh) {
    std::ofstream out(path_, std::ios::trunc);
    if (!out) throw IoError("cannot create metrics file '" + path_.string() + "'");
    out << header() << '\n';
  }
}

std::string CsvMetricSink::header() { return "epoch,train_loss,train_acc,test_acc,wall_seconds"; }

std::string CsvMetricSink::format(const EpochRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.6f", r.epoch, r.train_loss, r.train_acc, r.test_acc,
                r.wall_seconds);
  return buf;
}

void CsvMetricSink::append(const EpochRecord& record) {
  std::ofstream out(path_, std::ios::app);
  if (!out) throw IoError("cannot append to metrics file '" + path_.string() + "'");
  out << format(record) << '\n';
  if (!out) throw IoError("error while writing '" + path_.string() + "'");
}

}  // namespace ctxlstm
