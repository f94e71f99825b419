#include "scama/kernels.h"

#if defined(__x86_64__)

#include <immintrin.h>

namespace scama {
namespace kernels {
namespace {

__attribute__((target("avx2,fma"))) void vadd_avx2(const double* a,
                                                   const double* b, double* out,
                                                   std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

__attribute__((target("avx2,fma"))) void vmul_avx2(const double* a,
                                                   const double* b, double* out,
                                                   std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

__attribute__((target("avx2,fma"))) void axpy_avx2(double alpha,
                                                   const double* x, double* y,
                                                   std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(
        y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                               _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

__attribute__((target("avx2,fma"))) void vfma_avx2(const double* a,
                                                   const double* b, double* y,
                                                   std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(
        y + i, _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                               _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a[i] * b[i];
}

__attribute__((target("avx2,fma"))) double dot_avx2(const double* a,
                                                    const double* b,
                                                    std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  }
  __m128d lo = _mm256_castpd256_pd128(acc);
  __m128d hi = _mm256_extractf128_pd(acc, 1);
  lo = _mm_add_pd(lo, hi);
  double s = _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

__attribute__((target("avx2,fma"))) void gemm_nn_avx2(const double* a,
                                                      const double* b,
                                                      double* c, std::size_t m,
                                                      std::size_t n,
                                                      std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      axpy_avx2(a[i * n + k], b + k * p, c + i * p, p);
    }
  }
}

__attribute__((target("avx2,fma"))) void gemm_nt_avx2(const double* a,
                                                      const double* b,
                                                      double* c, std::size_t m,
                                                      std::size_t n,
                                                      std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      c[i * p + j] += dot_avx2(a + i * n, b + j * n, n);
    }
  }
}

__attribute__((target("avx2,fma"))) void gemm_tn_avx2(const double* a,
                                                      const double* b,
                                                      double* c, std::size_t m,
                                                      std::size_t n,
                                                      std::size_t p) {
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < m; ++i) {
      axpy_avx2(a[k * m + i], b + k * p, c + i * p, p);
    }
  }
}

}  // namespace

const Ops kAvx2Ops = {vadd_avx2, vmul_avx2,    axpy_avx2,    vfma_avx2, dot_avx2,
                      gemm_nn_avx2, gemm_nt_avx2, gemm_tn_avx2, "avx2"};

}  // namespace kernels
}  // namespace scama

#endif  // __x86_64__
