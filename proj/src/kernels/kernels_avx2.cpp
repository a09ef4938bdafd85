// SPDX-License-Identifier: Apache-2.0
//
// AVX2+FMA variants. Functions carry target attributes instead of the whole
// translation unit being built with -mavx2, so nothing here leaks AVX code
// into inline functions shared with other units. Callers must check
// backend_supported(Backend::avx2) first.
#include "ctxlstm/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define CTXLSTM_HAVE_AVX2_KERNELS 1
#include <immintrin.h>
#else
#define CTXLSTM_HAVE_AVX2_KERNELS 0
#endif

namespace ctxlstm::kernels {

#if CTXLSTM_HAVE_AVX2_KERNELS
namespace {

#define CTXLSTM_AVX2 __attribute__((target("avx2,fma")))

CTXLSTM_AVX2 inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

CTXLSTM_AVX2 double dot(std::size_t n, const double* a, const double* b) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

CTXLSTM_AVX2 void axpy(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

CTXLSTM_AVX2 void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a,
                          const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) axpy(n, a[i * k + p], b + p * n, c + i * n);
  }
}

CTXLSTM_AVX2 void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a,
                          const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] += dot(k, a + i * k, b + j * k);
  }
}

CTXLSTM_AVX2 void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a,
                          const double* b, double* c) {
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t i = 0; i < m; ++i) axpy(n, a[p * m + i], b + p * n, c + i * n);
  }
}

CTXLSTM_AVX2 void add(std::size_t n, const double* a, const double* b, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

CTXLSTM_AVX2 void mul(std::size_t n, const double* a, const double* b, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

CTXLSTM_AVX2 void mul_acc(std::size_t n, const double* a, const double* b, double* y) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a[i] * b[i];
}

#undef CTXLSTM_AVX2

constexpr KernelTable kAvx2{gemm_nn, gemm_nt, gemm_tn, add, mul, axpy, mul_acc, dot};

}  // namespace

const KernelTable& avx2_table() { return kAvx2; }

bool cpu_has_avx2() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

#else

// No AVX2 on this architecture; the table aliases the scalar one and
// backend_supported() reports false.
const KernelTable& avx2_table() { return scalar_table(); }
bool cpu_has_avx2() { return false; }

#endif

}  // namespace ctxlstm::kernels
