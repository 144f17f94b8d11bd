#include "path_kernel.hpp"

#if defined(SBR_HAVE_AVX2_TU)

#include <immintrin.h>

#include <cmath>

namespace sbr::kern {

// Four grid points per iteration; each lane runs the same ascending-d fma
// chain as the scalar kernel, so per-point results match it bit for bit.
double unit_max_avx2(const double* z_top, const double* phi, long tm,
                     int taps, long cnt) {
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  __m256d vbest = _mm256_setzero_pd();
  long i = 0;
  for (; i + 4 <= cnt; i += 4) {
    __m256d acc = _mm256_setzero_pd();
    const double* p = phi + i;
    for (int d = 0; d < taps; ++d) {
      __m256d w = _mm256_set1_pd(z_top[-d]);
      __m256d v = _mm256_loadu_pd(p + static_cast<long>(d) * tm);
      acc = _mm256_fmadd_pd(w, v, acc);
    }
    vbest = _mm256_max_pd(vbest, _mm256_andnot_pd(sign_mask, acc));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, vbest);
  double best = lanes[0];
  for (int l = 1; l < 4; ++l) {
    if (lanes[l] > best) best = lanes[l];
  }
  for (; i < cnt; ++i) {
    double acc = 0.0;
    const double* p = phi + i;
    for (int d = 0; d < taps; ++d) {
      acc = std::fma(z_top[-d], p[static_cast<long>(d) * tm], acc);
    }
    double mag = std::fabs(acc);
    if (mag > best) best = mag;
  }
  return best;
}

}  // namespace sbr::kern

#endif  // SBR_HAVE_AVX2_TU
