// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "ctxlstm/errors.hpp"
#include "ctxlstm/ops.hpp"
#include "ctxlstm/tape.hpp"
#include "ctxlstm/training.hpp"

namespace ctxlstm {

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2) throw DimensionError("cross_entropy: logits must be [batch, classes], got " + shape_str(logits.shape()));
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                         std::to_string(batch));
  }
  for (std::size_t i = 0; i < batch; ++i) {
    if (labels[i] >= classes) {
      throw DataError("cross_entropy: sample " + std::to_string(i) + " has label " + std::to_string(labels[i]) +
                      " outside [0, " + std::to_string(classes) + ")");
    }
  }
  auto x = logits.values();
  std::vector<double> probs(x.size());
  double total = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    const double* xr = x.data() + r * classes;
    const double mx = *std::max_element(xr, xr + classes);
    double sum = 0.0;
    for (std::size_t j = 0; j < classes; ++j) sum += (probs[r * classes + j] = std::exp(xr[j] - mx));
    for (std::size_t j = 0; j < classes; ++j) probs[r * classes + j] /= sum;
    total += mx + std::log(sum) - xr[labels[r]];
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(batch));
  if (should_record({&logits})) {
    std::vector<std::size_t> label_copy(labels.begin(), labels.end());
    active_tape()->record({logits}, out,
                          [logits, out, probs = std::move(probs), label_copy = std::move(label_copy), batch,
                           classes]() mutable {
      if (!logits.requires_grad()) return;
      const double g = out.scratch()[0] / static_cast<double>(batch);
      auto dx = logits.scratch();
      for (std::size_t r = 0; r < batch; ++r) {
        for (std::size_t j = 0; j < classes; ++j) {
          const double onehot = j == label_copy[r] ? 1.0 : 0.0;
          dx[r * classes + j] += g * (probs[r * classes + j] - onehot);
        }
      }
    });
  }
  return out;
}

double top1_accuracy(const Tensor& logits, std::span<const std::size_t> labels) {
  const auto pred = ops::argmax_last(logits);
  if (pred.size() != labels.size()) throw DimensionError("top1_accuracy: prediction/label count mismatch");
  if (pred.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

}  // namespace ctxlstm
