#pragma once

// Inner-loop arithmetic kernels. Every kernel has a scalar reference
// implementation and, where the CPU allows, an AVX2 variant chosen at
// runtime. Variants preserve the per-element operation order and use no
// fused multiply-add, so they agree bit for bit with the reference.

#include <cstddef>
#include <span>
#include <string_view>

namespace l2l::kernels {

enum class Backend { kScalar, kAvx2 };

struct KernelTable {
  // C[M x N] += A[M x K] * B[K x N], all row-major and contiguous.
  void (*gemm_acc)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                   const double* b, double* c);
  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  // out = x * y
  void (*mul)(std::size_t n, const double* x, const double* y, double* out);
  // out = max(x, 0)
  void (*relu)(std::size_t n, const double* x, double* out);
  // dx += (x > 0) ? dy : 0
  void (*relu_backward)(std::size_t n, const double* x, const double* dy, double* dx);
  // x = min(max(x, lo), hi)
  void (*clamp)(std::size_t n, double lo, double hi, double* x);
};

const KernelTable& scalar_table();
// Requires backend_available(Backend::kAvx2).
const KernelTable& avx2_table();

bool backend_available(Backend b);
Backend active_backend();
// Throws l2l::Error if the backend is unavailable on this CPU.
void set_backend(Backend b);
std::string_view backend_name(Backend b);

const KernelTable& active();

inline void gemm_acc(std::size_t m, std::size_t n, std::size_t k, const double* a,
                     const double* b, double* c) {
  active().gemm_acc(m, n, k, a, b, c);
}
inline void axpy(std::size_t n, double alpha, const double* x, double* y) {
  active().axpy(n, alpha, x, y);
}
inline void mul(std::size_t n, const double* x, const double* y, double* out) {
  active().mul(n, x, y, out);
}
inline void relu(std::size_t n, const double* x, double* out) { active().relu(n, x, out); }
inline void relu_backward(std::size_t n, const double* x, const double* dy, double* dx) {
  active().relu_backward(n, x, dy, dx);
}
inline void clamp(std::size_t n, double lo, double hi, double* x) {
  active().clamp(n, lo, hi, x);
}
inline void clamp(std::span<double> x, double lo, double hi) {
  active().clamp(x.size(), lo, hi, x.data());
}

// Row-major transpose helper used to keep every product in gemm_acc form.
void transpose(std::size_t rows, std::size_t cols, const double* in, double* out);

}  // namespace l2l::kernels
