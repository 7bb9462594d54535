#include <cstdlib>
#include <cstring>

#include "confagg/kernels.hpp"

namespace confagg::kernels {

// Defined in kernels_avx2.cpp; nullptr when that TU was built without AVX2.
const Backend* avx2_table();

const Backend* avx2_backend() {
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return avx2_table();
#endif
  return nullptr;
}

namespace {

const Backend& pick() {
  const char* force = std::getenv("CONFAGG_KERNELS");
  if (force != nullptr) {
    if (std::strcmp(force, "scalar") == 0) return scalar_backend();
    if (std::strcmp(force, "avx2") == 0) {
      const Backend* t = avx2_backend();
      if (t != nullptr) return *t;
    }
  }
  const Backend* t = avx2_backend();
  return t != nullptr ? *t : scalar_backend();
}

}  // namespace

const Backend& active() {
  static const Backend& chosen = pick();
  return chosen;
}

}  // namespace confagg::kernels
