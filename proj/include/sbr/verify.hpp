#ifndef SBR_VERIFY_HPP
#define SBR_VERIFY_HPP

#include <string>
#include <vector>

#include "sbr/cascade.hpp"
#include "sbr/filters.hpp"
#include "sbr/interval.hpp"

namespace sbr {

// Cellwise enclosures of the periodised variance sigma^2(t) = sum_k phi(t-k)^2
// and its first two derivatives, on the cells of one torus window.  Entry o
// corresponds to the cell [ (a+o) 2^-j, (a+o+1) 2^-j ).
struct SigmaEnclosure {
  long j = 0;
  TorusWindow window;
  std::vector<Interval> s0;
  std::vector<Interval> s1;
  std::vector<Interval> s2;

  long count() const { return static_cast<long>(s0.size()); }
};

// Combines enclosures of phi, phi' and phi'' (orders 0..2, same level as the
// window) into cellwise bounds on sigma^2 and its derivatives.  Each cell
// value is padded by the certified sup-norm error of its enclosure before
// squares and products, so the result contains the true range over the cell.
// Orders whose error is uncertified produce unbounded cells.  Throws when a
// required translate of some cell is not covered by an enclosure.
SigmaEnclosure sigma_enclosure(const FunctionEnclosure& phi0,
                               const FunctionEnclosure& phi1,
                               const FunctionEnclosure& phi2,
                               const TorusWindow& window,
                               const PrecisionContext& ctx);

// Smallest torus interval containing every cell that could hold the maximiser
// of sigma^2: cells whose s0 upper bound reaches the best lower bound and
// whose s1 range contains zero.  The result may wrap around the seam; it is
// reported at the same level as the input window.
TorusWindow candidate_interval(const SigmaEnclosure& se);

// Enclosure of upsilon = -2 num / den with num the range of sum_k phi'(t-k)^2
// and den the range of (sigma^2)'' over the cells of se.  Requires den to be
// certified negative.  sigma_bar_sq is the current enclosure of the variance
// maximum and must be strictly positive.
Interval upsilon_enclosure(const SigmaEnclosure& se,
                           const FunctionEnclosure& phi1,
                           const Interval& sigma_bar_sq,
                           const PrecisionContext& ctx);

// Mean of sum_m cell(r,m)^2 over the canonical residues of a full-torus
// order-0 enclosure, without error padding.  Orthonormality of the refinement
// scheme makes this contain 1 up to rounding at any level.
Interval torus_mean_sigma(const FunctionEnclosure& phi0,
                          const PrecisionContext& ctx);

struct VerificationReport {
  bool verified = false;
  Family family = Family::daubechies;
  int N = 0;
  TorusWindow I_final;
  TorusWindow t0_enclosure;
  Interval sigma_bar_sq{2};
  Interval upsilon{2};
  Interval second_deriv_upper{2};
  long j_final = 0;
  mpfr_prec_t precision_bits = 0;
  std::string note;
  // Per-level diagnostics: width of the running sigma^2 enclosure and of the
  // candidate interval, in cell-measure on the torus.
  std::vector<double> sigma_width_trace;
  std::vector<double> window_width_trace;
};

// Iterative localisation of the variance maximum.  Refines cascade
// enclosures level by level, shrinks the candidate interval after each step,
// and stops once both the sigma^2 and upsilon enclosures are narrower than
// target_width or max_level is reached.  Failure to certify is reported in
// the result, not thrown; only invalid arguments throw.
VerificationReport verify_assumption(Family family, int N, double target_width,
                                     long max_level,
                                     const PrecisionContext& ctx);

// Same loop on an explicit filter bank (e.g. one loaded from a file).  The
// bank is used as given; its stated family and moment count are carried into
// the report.  Precision escalation rebuilds the ladder, not the bank, so a
// bank whose enclosures are wider than the target can stall honestly.
VerificationReport verify_assumption(const FilterBank& bank,
                                     double target_width, long max_level,
                                     const PrecisionContext& ctx);

}  // namespace sbr

#endif  // SBR_VERIFY_HPP
