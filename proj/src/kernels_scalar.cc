#include "scama/kernels.h"

namespace scama {
namespace kernels {
namespace {

void vadd_scalar(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void vmul_scalar(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void vfma_scalar(const double* a, const double* b, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a[i] * b[i];
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// ikj ordering: the inner loop is a contiguous axpy over a row of B.
void gemm_nn_scalar(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t n, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      axpy_scalar(a[i * n + k], b + k * p, c + i * p, p);
    }
  }
}

void gemm_nt_scalar(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t n, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      c[i * p + j] += dot_scalar(a + i * n, b + j * n, n);
    }
  }
}

void gemm_tn_scalar(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t n, std::size_t p) {
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < m; ++i) {
      axpy_scalar(a[k * m + i], b + k * p, c + i * p, p);
    }
  }
}

}  // namespace

const Ops kScalarOps = {vadd_scalar,    vmul_scalar,    axpy_scalar,
                        vfma_scalar,    dot_scalar,     gemm_nn_scalar,
                        gemm_nt_scalar, gemm_tn_scalar, "scalar"};

}  // namespace kernels
}  // namespace scama
