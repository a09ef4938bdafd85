// SPDX-License-Identifier: Apache-2.0
#include "ctxlstm/data.hpp"

namespace ctxlstm {

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace ctxlstm
