// SPDX-License-Identifier: Apache-2.0
#include "ctxlstm/tape.hpp"

#include <unordered_set>

#include "ctxlstm/errors.hpp"

namespace ctxlstm {
namespace {
thread_local Tape* t_active = nullptr;
}

void Tape::record(std::vector<Tensor> inputs, Tensor output, BackwardFn backward) {
  output.set_requires_grad(true);
  nodes_.push_back(Node{std::move(inputs), std::move(output), std::move(backward)});
}

TapeScope::TapeScope(Tape* tape) : previous_(t_active) { t_active = tape; }
TapeScope::~TapeScope() { t_active = previous_; }

Tape* active_tape() { return t_active; }

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (t_active == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void backward(const Tensor& loss, Tape& tape) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  std::unordered_set<detail::TensorStorage*> produced;
  std::vector<Tensor> touched;
  std::unordered_set<detail::TensorStorage*> seen;
  auto visit = [&](const Tensor& t) {
    if (seen.insert(t.storage()).second) {
      t.storage()->scratch.clear();
      touched.push_back(t);
    }
  };
  for (const auto& node : tape.nodes()) {
    produced.insert(node.output.storage());
    visit(node.output);
    for (const auto& in : node.inputs) visit(in);
  }
  visit(loss);

  Tensor seed = loss;
  seed.scratch()[0] = 1.0;

  const auto& nodes = tape.nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    if (it->output.has_scratch()) it->backward();
  }

  for (auto& t : touched) {
    auto* s = t.storage();
    if (s->scratch.empty()) continue;
    if (produced.count(s) != 0) {
      s->grad = std::move(s->scratch);
    } else if (s->requires_grad) {
      if (s->grad.empty()) {
        s->grad = std::move(s->scratch);
      } else {
        for (std::size_t i = 0; i < s->grad.size(); ++i) s->grad[i] += s->scratch[i];
      }
    }
    s->scratch.clear();
  }
}

}  // namespace ctxlstm
