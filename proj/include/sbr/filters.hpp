#ifndef SBR_FILTERS_HPP
#define SBR_FILTERS_HPP

#include <string>
#include <vector>

#include "sbr/interval.hpp"

namespace sbr {

// File parsing or invariant-validation failure for coefficient banks.
struct FilterError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Family { daubechies, symlet, custom };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

// Two-scale filter coefficients u_0..u_{2K-1}, normalized so both parity
// sums equal 1. The scaling function is supported on [1-K, K] and satisfies
// phi(x) = sum_k u_k phi(2x + K - 1 - k).
struct FilterBank {
  Family family = Family::custom;
  int N = 0;  // vanishing moments
  int K = 0;  // half support width
  std::vector<Interval> u0;
  mpfr_prec_t precision_bits = 0;
};

// Minimum-phase (extremal-phase) family, K = N. Enclosure widths are at
// most 2^(8 - precision_bits); internal precision is raised automatically,
// and an error is thrown only if roots cannot be certified even then.
FilterBank daubechies_filter(int N, const PrecisionContext& ctx);

// Least-asymmetric root selection over all conjugate-reciprocal flips,
// minimizing mean absolute deviation of the factor phase from linearity.
// N >= 4.
FilterBank symlet_filter(int N, const PrecisionContext& ctx);

// Plain text bank: one `value radius` pair per line, both decimal strings,
// '#' comments allowed. Parity-sum violations are errors naming the sum;
// the vanishing-moment count is inferred and stored in N.
FilterBank load_filter(const std::string& path, const PrecisionContext& ctx);

// Round-trippable text form of a bank (same format load_filter reads).
std::string serialize_filter(const FilterBank& bank);

// sum over one parity class of u_k (parity 0 or 1).
Interval parity_sum(const FilterBank& bank, int parity,
                    const PrecisionContext& ctx);
// sum_k (-1)^k k^i u_k; contains 0 for i < N when psi has N vanishing
// moments (0^0 = 1).
Interval moment_sum(const FilterBank& bank, int order,
                    const PrecisionContext& ctx);
// Number of leading orders whose moment sum interval contains zero.
int count_vanishing_moments(const FilterBank& bank,
                            const PrecisionContext& ctx);

}  // namespace sbr

#endif
