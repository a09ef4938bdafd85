// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cstdlib>
#include <string>

#include "ctxlstm/errors.hpp"
#include "ctxlstm/kernels.hpp"

namespace ctxlstm::kernels {

bool cpu_has_avx2();  // kernels_avx2.cpp

namespace {

Backend initial_backend() {
  if (const char* env = std::getenv("CTXLSTM_KERNELS")) {
    const std::string v = env;
    if (v == "scalar") return Backend::scalar;
    if (v == "avx2" && cpu_has_avx2()) return Backend::avx2;
  }
  return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{initial_backend()};
  return backend;
}

}  // namespace

bool backend_supported(Backend backend) {
  return backend == Backend::scalar || cpu_has_avx2();
}

std::string_view backend_name(Backend backend) {
  return backend == Backend::avx2 ? "avx2" : "scalar";
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

const KernelTable& table(Backend backend) {
  return backend == Backend::avx2 ? avx2_table() : scalar_table();
}

const KernelTable& active() { return table(active_backend()); }

void select_backend(Backend backend) {
  if (!backend_supported(backend)) {
    throw ContractError("kernel backend '" + std::string(backend_name(backend)) +
                        "' is not supported on this CPU");
  }
  current().store(backend, std::memory_order_relaxed);
}

}  // namespace ctxlstm::kernels
