#include <atomic>
#include <cstdlib>
#include <string>

#include "l2l/error.hpp"
#include "l2l/kernels.hpp"

namespace l2l::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(L2L_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Backend initial_backend() {
  if (const char* env = std::getenv("L2L_KERNELS")) {
    const std::string v(env);
    if (v == "scalar") return Backend::kScalar;
    if (v == "avx2" && cpu_has_avx2()) return Backend::kAvx2;
  }
  return cpu_has_avx2() ? Backend::kAvx2 : Backend::kScalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> b{initial_backend()};
  return b;
}

}  // namespace

bool backend_available(Backend b) {
  return b == Backend::kScalar || (b == Backend::kAvx2 && cpu_has_avx2());
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (!backend_available(b)) {
    throw Error("kernels: backend " + std::string(backend_name(b)) +
                " is not available on this CPU");
  }
  current().store(b, std::memory_order_relaxed);
}

std::string_view backend_name(Backend b) {
  return b == Backend::kAvx2 ? "avx2" : "scalar";
}

const KernelTable& active() {
#if defined(L2L_HAVE_AVX2)
  if (active_backend() == Backend::kAvx2) return avx2_table();
#endif
  return scalar_table();
}

}  // namespace l2l::kernels
