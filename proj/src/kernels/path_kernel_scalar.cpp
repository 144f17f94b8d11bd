#include "path_kernel.hpp"

#include <cmath>

namespace sbr::kern {

double unit_max_scalar(const double* z_top, const double* phi, long tm,
                       int taps, long cnt) {
  double best = 0.0;
  for (long i = 0; i < cnt; ++i) {
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
