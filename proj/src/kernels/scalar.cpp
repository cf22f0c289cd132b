#include "l2l/kernels.hpp"

namespace l2l::kernels {
namespace {

void gemm_acc_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a,
                     const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void axpy_scalar(std::size_t n, double alpha, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void mul_scalar(std::size_t n, const double* x, const double* y, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void relu_scalar(std::size_t n, const double* x, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_scalar(std::size_t n, const double* x, const double* dy, double* dx) {
  for (std::size_t i = 0; i < n; ++i) dx[i] += x[i] > 0.0 ? dy[i] : 0.0;
}

void clamp_scalar(std::size_t n, double lo, double hi, double* x) {
  for (std::size_t i = 0; i < n; ++i) {
    const double t = lo > x[i] ? lo : x[i];
    x[i] = hi < t ? hi : t;
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t{gemm_acc_scalar, axpy_scalar, mul_scalar,
                             relu_scalar,     relu_backward_scalar, clamp_scalar};
  return t;
}

void transpose(std::size_t rows, std::size_t cols, const double* in, double* out) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = in[r * cols + c];
}

}  // namespace l2l::kernels
