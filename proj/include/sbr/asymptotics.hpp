#ifndef SBR_ASYMPTOTICS_HPP
#define SBR_ASYMPTOTICS_HPP

#include "sbr/interval.hpp"

namespace sbr {

// Constants entering the critical-value formula.  sigma is the noise scale
// of the observation model (n^(-1/2) in white noise); the enclosures come
// from a verification run or are supplied by hand.
struct BandConstants {
  Interval sigma_bar_sq{2};
  Interval upsilon{2};
  double sigma = 1.0;
};

struct CriticalQuery {
  double j = 1.0;      // resolution level, j >= 1 (need not be integer)
  double gamma = 0.0;  // tail level in (0, 1)
};

// Gumbel normalisation and threshold pieces, natural logs throughout:
//   a(j) = sqrt(2 log(2) j)
//   b(j) = a(j) - [log(pi log 2) + log j - log(1+upsilon)/2] / (2 a(j))
//   c(j) = sqrt(sigma_bar_sq)/sigma * 2^(j/2)
//   x(g) = -log(-log(1-g))
// Domain violations throw std::invalid_argument.
double a_of(double j);
double b_of(double j, double upsilon);
double c_of(double j, const BandConstants& c);  // midpoint of sigma_bar_sq
double x_of(double gamma);

// x(gamma)/a(j) + b(j), the threshold for the unit-scale process.
double normalized_threshold(const CriticalQuery& q, double upsilon);

// u = c(j) (x(gamma)/a(j) + b(j)); interval constants enter via midpoints.
double critical_value(const CriticalQuery& q, const BandConstants& c);

// Outward-rounded variants.  j, gamma and sigma arguments are taken as the
// exact binary values supplied; constant enclosures propagate through.
Interval a_iv(double j, const PrecisionContext& ctx);
Interval b_iv(double j, const Interval& upsilon, const PrecisionContext& ctx);
Interval c_iv(double j, const Interval& sigma_bar_sq, double sigma,
              const PrecisionContext& ctx);
Interval x_iv(const Interval& gamma, const PrecisionContext& ctx);
Interval normalized_threshold_iv(const CriticalQuery& q,
                                 const Interval& upsilon,
                                 const PrecisionContext& ctx);
Interval critical_value_iv(const CriticalQuery& q, const BandConstants& c,
                           const PrecisionContext& ctx);

}  // namespace sbr

#endif  // SBR_ASYMPTOTICS_HPP
