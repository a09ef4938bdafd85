// SPDX-License-Identifier: Apache-2.0
//
// Inner-loop arithmetic kernels. Every routine exists as a scalar reference
// and, where the CPU allows, as an AVX2+FMA variant. The active table is
// chosen once at first use: AVX2 when supported, unless the environment
// variable CTXLSTM_KERNELS is set to "scalar". Tests compare the variants
// against each other.
#pragma once

#include <cstddef>
#include <string_view>

namespace ctxlstm::kernels {

enum class Backend { scalar, avx2 };

// All matrices are dense row-major. gemm routines accumulate into c.
struct KernelTable {
  // c[m,n] += a[m,k] * b[k,n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);
  // c[m,n] += a[m,k] * b[n,k]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);
  // c[m,n] += a[k,m]^T * b[k,n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);
  // out = a + b
  void (*add)(std::size_t n, const double* a, const double* b, double* out);
  // out = a * b
  void (*mul)(std::size_t n, const double* a, const double* b, double* out);
  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  // y += a * b
  void (*mul_acc)(std::size_t n, const double* a, const double* b, double* y);
  double (*dot)(std::size_t n, const double* a, const double* b);
};

const KernelTable& scalar_table();
// Only valid to call when backend_supported(Backend::avx2).
const KernelTable& avx2_table();

bool backend_supported(Backend backend);
std::string_view backend_name(Backend backend);

Backend active_backend();
const KernelTable& active();
const KernelTable& table(Backend backend);

// Throws ContractError when the CPU lacks the requested instruction set.
void select_backend(Backend backend);

}  // namespace ctxlstm::kernels
