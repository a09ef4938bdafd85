// SPDX-License-Identifier: Apache-2.0
#include "ctxlstm/random.hpp"

#include <sstream>

#include "ctxlstm/errors.hpp"

namespace ctxlstm {

std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void set_rng_state(Rng& rng, const std::string& state) {
  std::istringstream is(state);
  Rng restored;
  is >> restored;
  if (is.fail()) throw DataError("malformed RNG state");
  rng = restored;
}

}  // namespace ctxlstm
