// SPDX-License-Identifier: Apache-2.0
#include <map>

#include "ctxlstm/errors.hpp"
#include "ctxlstm/model.hpp"

namespace ctxlstm {

std::size_t SequenceClassifier::count_params() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

std::unique_ptr<SequenceClassifier> make_model(const ModelSpec& spec, Rng& init_rng) {
  if (spec.kind == ModelKind::baseline) return std::make_unique<BaselineLSTM>(spec.baseline, init_rng);
  return std::make_unique<ContextLSTM>(spec.context, init_rng);
}

void copy_parameters(const SequenceClassifier& from, SequenceClassifier& to) {
  std::map<std::string, Tensor> source;
  for (const auto& p : from.parameters()) source.emplace(p.name, p.tensor);
  for (auto& p : to.parameters()) {
    auto it = source.find(p.name);
    if (it == source.end()) throw DimensionError("copy_parameters: source has no parameter '" + p.name + "'");
    if (it->second.shape() != p.tensor.shape()) {
      throw DimensionError("copy_parameters: '" + p.name + "' has shape " + shape_str(it->second.shape()) +
                           ", expected " + shape_str(p.tensor.shape()));
    }
    auto src = it->second.values();
    std::copy(src.begin(), src.end(), p.tensor.mutable_values().begin());
  }
}

std::size_t lstm_direction_layer_params(std::size_t input, std::size_t hidden) {
  return 4 * (hidden * (input + hidden) + hidden);
}

double lstm_step_flops(std::size_t input, std::size_t hidden) {
  return 8.0 * static_cast<double>(hidden * (input + hidden)) + 10.0 * static_cast<double>(hidden);
}

double linear_flops(std::size_t in, std::size_t out) {
  return 2.0 * static_cast<double>(in * out) + static_cast<double>(out);
}

double head_flops(std::size_t in, std::size_t fc1_out, std::size_t classes) {
  return linear_flops(in, fc1_out) + static_cast<double>(fc1_out) + linear_flops(fc1_out, classes);
}

}  // namespace ctxlstm
