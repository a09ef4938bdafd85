// SPDX-License-Identifier: Apache-2.0
#include "ctxlstm/errors.hpp"
#include "ctxlstm/model.hpp"
#include "ctxlstm/ops.hpp"

namespace ctxlstm {

ClassifierHead ClassifierHead::uniform(std::size_t in, std::size_t fc1_out, std::size_t classes,
                                       double dropout_rate, Rng& rng) {
  ClassifierHead head;
  head.fc1 = Linear::uniform(in, fc1_out, rng);
  head.fc2 = Linear::uniform(fc1_out, classes, rng);
  head.dropout_rate = dropout_rate;
  return head;
}

Tensor ClassifierHead::forward(const Tensor& features, Mode mode, Rng& rng) const {
  Tensor h = ops::relu(linear_forward(fc1, features));
  h = dropout_forward(h, dropout_rate, mode, rng);
  return linear_forward(fc2, h);
}

void ClassifierHead::append_named(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".fc1.weight", fc1.weight});
  out.push_back({prefix + ".fc1.bias", fc1.bias});
  out.push_back({prefix + ".fc2.weight", fc2.weight});
  out.push_back({prefix + ".fc2.bias", fc2.bias});
}

Tensor readout(const Tensor& seq, Readout how) {
  if (seq.rank() != 3) throw DimensionError("readout: expected [batch,time,features], got " + shape_str(seq.shape()));
  return how == Readout::last_step ? ops::select(seq, 1, seq.dim(1) - 1) : ops::mean_axis(seq, 1);
}

}  // namespace ctxlstm
