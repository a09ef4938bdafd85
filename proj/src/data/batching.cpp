// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <numeric>

#include "ctxlstm/data.hpp"
#include "ctxlstm/random.hpp"

namespace ctxlstm {

std::vector<SequenceBatch> make_batches(const Dataset& data, std::size_t batch_size, std::size_t window,
                                        std::uint64_t seed, std::uint64_t epoch, Sampling sampling) {
  if (data.items.empty()) throw DataError("cannot batch an empty dataset");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (window == 0) throw ConfigError("time window must be >= 1");
  for (const auto& item : data.items) {
    if (item.frames.dim(0) < window) {
      throw DataError("sequence '" + item.id + "' has " + std::to_string(item.frames.dim(0)) +
                      " frames, shorter than the window of " + std::to_string(window));
    }
  }

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x4241544348ULL, epoch));  // "BATCH"
  if (sampling == Sampling::training) shuffle(order, rng);

  const std::size_t dim = data.dim;
  std::vector<SequenceBatch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, order.size() - start);
    SequenceBatch batch;
    batch.features = Tensor::zeros({count, window, dim});
    auto out = batch.features.mutable_values();
    for (std::size_t b = 0; b < count; ++b) {
      const auto& item = data.items[order[start + b]];
      const std::size_t time = item.frames.dim(0);
      const std::size_t offset = sampling == Sampling::training ? uniform_index(rng, time - window + 1)
                                                                : (time - window) / 2;
      auto src = item.frames.values();
      std::copy_n(src.begin() + offset * dim, window * dim, out.begin() + b * window * dim);
      batch.labels.push_back(item.label);
      batch.indices.push_back(order[start + b]);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace ctxlstm
