#include <cstdlib>
#include <cstring>

#include "texflow/kernels.hpp"

namespace texflow::kernels {

#if defined(TEXFLOW_HAVE_AVX2_TU)
const Kernels* avx2_table();  // defined in kernels_avx2.cpp
#endif

const Kernels* avx2() {
#if defined(TEXFLOW_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

const Kernels& active() {
  static const Kernels* chosen = [] {
    const char* forced = std::getenv("TEXFLOW_SIMD");
    if (forced && std::strcmp(forced, "scalar") == 0) return &scalar();
    if (forced && std::strcmp(forced, "avx2") == 0 && avx2()) return avx2();
    return avx2() ? avx2() : &scalar();
  }();
  return *chosen;
}

}  // namespace texflow::kernels
