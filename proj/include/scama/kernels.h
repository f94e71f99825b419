// Dense double-precision inner loops used by the tensor core.
//
// Every kernel has a scalar reference implementation and, on x86-64 with
// AVX2+FMA, a vectorized variant. The active set is chosen once at startup
// from cpuid; SCAMA_KERNELS=scalar|avx2 overrides the choice (equivalence
// tests rely on this).

#ifndef SCAMA_KERNELS_H_
#define SCAMA_KERNELS_H_

#include <cstddef>
#include <string>

namespace scama {
namespace kernels {

struct Ops {
  // out[i] = a[i] + b[i]
  void (*vadd)(const double* a, const double* b, double* out, std::size_t n);
  // out[i] = a[i] * b[i]
  void (*vmul)(const double* a, const double* b, double* out, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y[i] += a[i] * b[i]
  void (*vfma)(const double* a, const double* b, double* y, std::size_t n);
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // C[m x p] += A[m x n] * B[n x p], all row-major
  void (*gemm_nn)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t n, std::size_t p);
  // C[m x p] += A[m x n] * B[p x n]^T
  void (*gemm_nt)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t n, std::size_t p);
  // C[m x p] += A[n x m]^T * B[n x p]
  void (*gemm_tn)(const double* a, const double* b, double* c, std::size_t m,
                  std::size_t n, std::size_t p);
  const char* name;
};

extern const Ops kScalarOps;
#if defined(__x86_64__)
extern const Ops kAvx2Ops;
#endif

// Active kernel set (dispatched once, thread-safe).
const Ops& active();

// True if the AVX2 path is compiled in and the CPU supports it.
bool avx2_available();

}  // namespace kernels
}  // namespace scama

#endif  // SCAMA_KERNELS_H_
