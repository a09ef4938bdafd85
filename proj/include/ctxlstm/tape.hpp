// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "ctxlstm/tensor.hpp"

namespace ctxlstm {

// Records differentiable operations in execution order. Operations record
// into the tape installed on the calling thread by a TapeScope; with no
// active tape nothing is recorded and outputs never require grad.
class Tape {
 public:
  // Reads output.scratch() and accumulates into the inputs' scratch().
  using BackwardFn = std::function<void()>;

  struct Node {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::vector<Tensor> inputs, Tensor output, BackwardFn backward);

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  void clear() { nodes_.clear(); }

 private:
  std::vector<Node> nodes_;
};

// Installs a tape (or nullptr to suspend recording) for the current thread.
class TapeScope {
 public:
  explicit TapeScope(Tape* tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

// True when an operation on these inputs must be recorded.
bool should_record(std::initializer_list<const Tensor*> inputs);

// Populates grad on every requires_grad leaf reached from loss. Leaf
// gradients accumulate across calls; intermediate tensors receive this
// pass's gradient. Throws ContractError unless loss has exactly one element.
void backward(const Tensor& loss, Tape& tape);

}  // namespace ctxlstm
