#include "scama/kernels.h"

#include <cstdlib>
#include <cstring>

namespace scama {
namespace kernels {

bool avx2_available() {
#if defined(__x86_64__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const Ops& select() {
  const char* force = std::getenv("SCAMA_KERNELS");
  if (force != nullptr) {
    if (std::strcmp(force, "scalar") == 0) return kScalarOps;
#if defined(__x86_64__)
    if (std::strcmp(force, "avx2") == 0 && avx2_available()) return kAvx2Ops;
#endif
  }
#if defined(__x86_64__)
  if (avx2_available()) return kAvx2Ops;
#endif
  return kScalarOps;
}

}  // namespace

const Ops& active() {
  static const Ops& ops = select();
  return ops;
}

}  // namespace kernels
}  // namespace scama
