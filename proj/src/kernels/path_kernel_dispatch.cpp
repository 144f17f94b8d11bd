#include "path_kernel.hpp"

#include <cstdlib>
#include <cstring>

namespace sbr::kern {

namespace {

bool force_scalar() {
  const char* env = std::getenv("SBR_FORCE_SCALAR_KERNEL");
  return env != nullptr && std::strcmp(env, "0") != 0 && env[0] != '\0';
}

}  // namespace

unit_max_fn select_unit_max() {
  if (force_scalar()) return unit_max_scalar;
#if defined(SBR_HAVE_AVX2_TU)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    return unit_max_avx2;
  }
#endif
#if defined(SBR_HAVE_NEON_TU)
  return unit_max_neon;
#endif
  return unit_max_scalar;
}

const char* selected_kernel_name() {
  unit_max_fn fn = select_unit_max();
#if defined(SBR_HAVE_AVX2_TU)
  if (fn == unit_max_avx2) return "avx2";
#endif
#if defined(SBR_HAVE_NEON_TU)
  if (fn == unit_max_neon) return "neon";
#endif
  (void)fn;
  return "scalar";
}

}  // namespace sbr::kern
