#ifndef SBR_SIMULATE_HPP
#define SBR_SIMULATE_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sbr/cascade.hpp"
#include "sbr/filters.hpp"
#include "sbr/interval.hpp"
#include "sbr/verify.hpp"

namespace sbr {

// Monte Carlo study of X(t) = sigma_bar^(-1) sum_k phi(t-k) Z_k on [0, 2^j]:
// grid suprema of |X|, exceedance rates of the Gumbel thresholds, and
// deterministic cross-checks of the simulation shortcut.

struct SimulationConfig {
  Family family = Family::daubechies;
  int N = 8;
  std::string bank_path;  // used when family == custom

  long j = 6;           // domain [0, 2^j]
  long grid_depth = 15;  // m: evaluation step 2^(-m)
  long coarse_depth = 3;  // first scan depth of the pruned grid search
  long phi_level = 12;  // cascade level of the value table

  long reps = 1000;
  std::uint64_t seed = 1;
  std::vector<double> gammas{0.1};

  double constants_tol = 1e-4;  // width target for sigma_bar_sq / upsilon
  long verify_max_level = 40;
  int threads = 1;
};

struct GammaRow {
  double gamma = 0.0;
  double threshold = 0.0;  // normalized threshold for the unit-scale process
  long exceed_count = 0;
  double exceed_fraction = 0.0;
  double ratio = 0.0;           // exceed_fraction / gamma
  double stderr_binomial = 0.0;  // sqrt(p_hat (1 - p_hat) / reps)
};

struct SimulationReport {
  SimulationConfig config;
  std::vector<GammaRow> rows;
  double ks_distance = 0.0;  // of a(j)(sup - b(j)) against exp(-e^(-x))
  // Certified bound on how far the grid maximum of the table process can sit
  // below the continuous supremum of X, over every path of this run.
  double grid_sup_bias_bound = 0.0;
  Interval sigma_bar_sq{2};
  Interval upsilon{2};
  double a_j = 0.0;
  double b_j = 0.0;
  double zmax = 0.0;  // max |Z_k| over all reps
  double sup_min = 0.0;
  double sup_mean = 0.0;
  double sup_max = 0.0;
  std::string kernel;
  bool rep_warning = false;  // reps below 100 / min(gammas)
  std::string note;
  std::vector<double> sups;  // per-rep grid maxima, rep order
};

// Wichura's PPND16 rational approximation of the standard normal quantile,
// the fixed Gaussian transform of the Monte Carlo driver.  Relative error
// below 1e-15 across (0, 1); outside (0, 1) throws std::invalid_argument.
double normal_quantile(double p);

// Precomputed context for path simulation: filter bank, verified variance
// constants, cascade value tables at the coarse and fine grid depths, and a
// rigorous per-cell Lipschitz bound used to prune the grid search.  Either
// the bank is the unit indicator scheme (exact, no cascade needed) or the
// variance-maximum verification must succeed; otherwise the constructor
// throws std::invalid_argument carrying the verification note.
class PathSampler {
 public:
  PathSampler(const SimulationConfig& cfg, const PrecisionContext& ctx);
  ~PathSampler();
  PathSampler(const PathSampler&) = delete;
  PathSampler& operator=(const PathSampler&) = delete;

  // Exact maximum of |X| over the depth-m grid of [0, 2^j] for one rep.
  // Coarse cells whose certified bound cannot reach the running maximum are
  // skipped, so the result equals a full fine scan bit for bit.  zmax_out,
  // when given, receives max_k |Z_k| of this rep.
  double sup_one(std::uint64_t rep, double* zmax_out = nullptr) const;

  // X at grid point fine_index * 2^(-m), same substream as sup_one.
  double value_at(std::uint64_t rep, long fine_index) const;

  long fine_points() const;  // 2^(j + m) + 1
  const SimulationConfig& config() const;
  bool indicator_scheme() const;  // K == 1 shortcut
  const FilterBank& bank() const;
  const Interval& sigma_bar_sq() const;
  const Interval& upsilon() const;  // indicator scheme: whole line
  bool constants_verified() const;
  const VerificationReport& verification() const;  // invalid for indicator
  double table_error() const;       // sup |phi - table| / sigma_bar, certified
  double deriv_sum_bound() const;   // sup_t sum_k |phi'(t-k)| / sigma_bar
  const char* kernel_name() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One path's grid supremum from a fresh sampler; convenience wrapper, the
// sampler construction dominates the cost.  Prefer PathSampler for loops.
double simulate_sup(const SimulationConfig& cfg, std::uint64_t rep,
                    const PrecisionContext& ctx);

// Full Monte Carlo run: per-gamma exceedance rates of the normalized
// thresholds, KS distance of the rescaled suprema against the Gumbel law,
// and the certified grid bias bound.  Identical (config, seed) give
// bit-identical reports regardless of thread count.  Requires the
// variance-maximum constants to be verified (the indicator scheme has no
// curvature constant, hence no thresholds): std::invalid_argument otherwise.
SimulationReport mc_exceedance(const SimulationConfig& cfg,
                               const PrecisionContext& ctx);

struct KernelIdentityResult {
  double max_deviation = 0.0;  // |coarse + details - fine| over the grid
  double separated_max = 0.0;  // kernel magnitudes at |s - t| >= 2K - 1
  double diag_min = 0.0;       // fine-kernel diagonal range over the grid
  double diag_max = 0.0;
  double table_eps = 0.0;      // per-value error of the tables used
  double phi_abs_max = 0.0;
};

// Deterministic check of the change-of-basis shortcut: the reproducing
// kernel of the level-j0 scheme plus the detail kernels of levels
// j0..j-1 (mirror filter v_k = (-1)^k u_{2K-1-k}) must equal the level-j
// kernel.  Evaluated on a dyadic (s, t) grid of step 2^(-3) covering
// separated pairs; phi values come from a level phi_level table at grid
// depth grid_depth >= max(j, 3).
KernelIdentityResult kernel_identity_check(const FilterBank& bank, long j0,
                                           long j, long grid_depth,
                                           long phi_level,
                                           const PrecisionContext& ctx);

// P(max of 2^j iid |N(0,1)| > u) = 1 - (2 Phi(u) - 1)^(2^j), evaluated in
// interval arithmetic and returned as the midpoint.  Oracle for the unit
// indicator scheme, whose path supremum has exactly this law.  u must be
// >= 0 and j >= 0.
double haar_exact_exceedance(long j, double u, const PrecisionContext& ctx);

}  // namespace sbr

#endif  // SBR_SIMULATE_HPP
