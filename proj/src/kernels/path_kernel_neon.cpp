#include "path_kernel.hpp"

#if defined(SBR_HAVE_NEON_TU)

#include <arm_neon.h>

#include <cmath>

namespace sbr::kern {

// Two grid points per iteration; lanes follow the scalar fma chain exactly.
double unit_max_neon(const double* z_top, const double* phi, long tm,
                     int taps, long cnt) {
  float64x2_t vbest = vdupq_n_f64(0.0);
  long i = 0;
  for (; i + 2 <= cnt; i += 2) {
    float64x2_t acc = vdupq_n_f64(0.0);
    const double* p = phi + i;
    for (int d = 0; d < taps; ++d) {
      float64x2_t w = vdupq_n_f64(z_top[-d]);
      float64x2_t v = vld1q_f64(p + static_cast<long>(d) * tm);
      acc = vfmaq_f64(acc, w, v);
    }
    vbest = vmaxq_f64(vbest, vabsq_f64(acc));
  }
  double best = vgetq_lane_f64(vbest, 0);
  double hi = vgetq_lane_f64(vbest, 1);
  if (hi > best) best = hi;
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

#endif  // SBR_HAVE_NEON_TU
