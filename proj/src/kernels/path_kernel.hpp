#ifndef SBR_KERNELS_PATH_KERNEL_HPP
#define SBR_KERNELS_PATH_KERNEL_HPP

namespace sbr::kern {

// max_{i in [0, cnt)} | sum_{d=0}^{taps-1} z_top[-d] * phi[d*tm + i] |
//
// One unit interval of the path: z_top points at the weight of the current
// integer translate and is read backwards, phi is a table of scheme values
// on a grid of tm points per unit step.  All variants accumulate each point
// as a single fused-multiply-add chain in ascending d, so scalar and SIMD
// results are bit-identical per point.
using unit_max_fn = double (*)(const double* z_top, const double* phi,
                               long tm, int taps, long cnt);

double unit_max_scalar(const double* z_top, const double* phi, long tm,
                       int taps, long cnt);
#if defined(SBR_HAVE_AVX2_TU)
double unit_max_avx2(const double* z_top, const double* phi, long tm,
                     int taps, long cnt);
#endif
#if defined(SBR_HAVE_NEON_TU)
double unit_max_neon(const double* z_top, const double* phi, long tm,
                     int taps, long cnt);
#endif

// Picks the widest variant the CPU supports; SBR_FORCE_SCALAR_KERNEL=1 in
// the environment forces the scalar path.
unit_max_fn select_unit_max();
const char* selected_kernel_name();

}  // namespace sbr::kern

#endif  // SBR_KERNELS_PATH_KERNEL_HPP
