#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>
#include <stdexcept>
#include <vector>

#include "sbr/asymptotics.hpp"
#include "sbr/interval.hpp"
#include "sbr/simulate.hpp"
#include "../src/kernels/path_kernel.hpp"

using namespace sbr;

namespace {

const PrecisionContext kCtx{256};

SimulationConfig haar_config(long j, long m) {
  SimulationConfig cfg;
  cfg.family = Family::daubechies;
  cfg.N = 1;
  cfg.j = j;
  cfg.grid_depth = m;
  cfg.coarse_depth = 3;
  cfg.reps = 16;
  cfg.seed = 7;
  return cfg;
}

SimulationConfig db6_config(long j, long m, long jphi) {
  SimulationConfig cfg;
  cfg.family = Family::daubechies;
  cfg.N = 6;
  cfg.j = j;
  cfg.grid_depth = m;
  cfg.phi_level = jphi;
  cfg.coarse_depth = 3;
  cfg.reps = 16;
  cfg.seed = 5;
  cfg.constants_tol = 1e-3;
  return cfg;
}

}  // namespace

TEST_CASE("inverse normal quantile inverts the normal cdf") {
  CHECK(normal_quantile(0.5) == 0.0);
  CHECK(normal_quantile(0.975) ==
        doctest::Approx(1.959963984540054).epsilon(1e-15));
  CHECK(normal_quantile(0.025) ==
        doctest::Approx(-1.959963984540054).epsilon(1e-15));

  std::mt19937_64 gen(20260815);
  std::uniform_real_distribution<double> unif(1e-6, 1.0 - 1e-6);
  std::vector<double> ps;
  for (int i = 0; i < 100; ++i) ps.push_back(unif(gen));
  ps.insert(ps.end(), {1e-300, 1e-12, std::ldexp(1.0, -54), 0.3,
                       1.0 - std::ldexp(1.0, -53), 1.0 - 1e-12});
  for (double p : ps) {
    double x = normal_quantile(p);
    double phi = iv_normal_cdf(Interval::point_double(x, kCtx), kCtx)
                     .mid_double();
    // quantile error ~1e-15 in x maps to ~(1+x^2) relative error in p
    double tol = 1e-11 * std::min(p, 1.0 - p) + 1e-15;
    CHECK(std::fabs(phi - p) <= tol);
  }

  double prev = -1e308;
  for (double p = 0.02; p < 1.0; p += 0.02) {
    double x = normal_quantile(p);
    CHECK(x > prev);
    prev = x;
  }

  CHECK_THROWS_AS((void)normal_quantile(0.0), std::invalid_argument);
  CHECK_THROWS_AS((void)normal_quantile(1.0), std::invalid_argument);
  CHECK_THROWS_AS((void)normal_quantile(-0.1), std::invalid_argument);
  CHECK_THROWS_AS((void)normal_quantile(std::nan("")), std::invalid_argument);
}

TEST_CASE("kernel variants agree with the scalar reference bit for bit") {
  kern::unit_max_fn active = kern::select_unit_max();
  std::mt19937_64 gen(99);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int taps = 1 + static_cast<int>(gen() % 15);
    const long tm = 1L << (1 + static_cast<int>(gen() % 6));
    const long cnt = 1 + static_cast<long>(gen() % (tm + 1));
    std::vector<double> z(static_cast<std::size_t>(taps));
    std::vector<double> phi(static_cast<std::size_t>(taps) * tm + 1);
    for (double& v : z) v = gauss(gen);
    for (double& v : phi) v = gauss(gen);
    double a = kern::unit_max_scalar(z.data() + taps - 1, phi.data(), tm,
                                     taps, cnt);
    double b = active(z.data() + taps - 1, phi.data(), tm, taps, cnt);
    REQUIRE(a == b);
  }
}

TEST_CASE("forcing the scalar kernel leaves results unchanged") {
  SimulationConfig cfg = haar_config(4, 6);
  std::vector<double> normal;
  {
    PathSampler ps(cfg, kCtx);
    CHECK((std::string(ps.kernel_name()) == "scalar" ||
           std::string(ps.kernel_name()) == "avx2" ||
           std::string(ps.kernel_name()) == "neon"));
    for (int r = 0; r < 10; ++r) normal.push_back(ps.sup_one(r));
  }
  setenv("SBR_FORCE_SCALAR_KERNEL", "1", 1);
  {
    PathSampler ps(cfg, kCtx);
    CHECK(std::string(ps.kernel_name()) == "scalar");
    for (int r = 0; r < 10; ++r) {
      REQUIRE(ps.sup_one(r) == normal[static_cast<std::size_t>(r)]);
    }
  }
  unsetenv("SBR_FORCE_SCALAR_KERNEL");
}

TEST_CASE("indicator scheme reduces to the exact order statistic law") {
  const long j = 3, m = 6;
  PathSampler ps(haar_config(j, m), kCtx);
  CHECK(ps.indicator_scheme());
  CHECK_FALSE(ps.constants_verified());
  CHECK(ps.table_error() == 0.0);
  CHECK(ps.deriv_sum_bound() == 0.0);
  CHECK(ps.sigma_bar_sq().contains_si(1));
  CHECK(ps.sigma_bar_sq().width_double() == 0.0);
  CHECK_FALSE(ps.upsilon().is_finite());
  CHECK_THROWS_AS((void)ps.verification(), std::logic_error);
  CHECK(ps.fine_points() == (1L << (j + m)) + 1);

  for (int r = 0; r < 8; ++r) {
    double cellmax = 0.0;
    for (long u = 0; u < (1L << j); ++u) {
      double v = std::fabs(ps.value_at(r, u << m));
      cellmax = std::max(cellmax, v);
      // piecewise constant on unit cells
      CHECK(ps.value_at(r, (u << m) + 3) == ps.value_at(r, u << m));
    }
    REQUIRE(ps.sup_one(r) == cellmax);
    // the right endpoint extends no weight beyond the last translate
    CHECK(ps.value_at(r, 1L << (j + m)) == 0.0);
  }

  // grid depth cannot matter for a piecewise constant path
  PathSampler fine(haar_config(j, 9), kCtx);
  for (int r = 0; r < 8; ++r) REQUIRE(ps.sup_one(r) == fine.sup_one(r));
}

TEST_CASE("pruned grid search equals the full scan bit for bit") {
  SimulationConfig pruned = db6_config(4, 14, 11);
  SimulationConfig full = pruned;
  full.coarse_depth = 14;  // single stage: every cell scanned at depth m
  PathSampler pa(pruned, kCtx);
  PathSampler pb(full, kCtx);
  for (int r = 0; r < 8; ++r) {
    REQUIRE(pa.sup_one(r) == pb.sup_one(r));
  }
}

TEST_CASE("path values and the pruned maximum agree pointwise") {
  SimulationConfig cfg = db6_config(3, 13, 10);
  PathSampler ps(cfg, kCtx);
  CHECK(ps.constants_verified());
  CHECK(ps.verification().verified);
  CHECK(ps.table_error() > 0.0);
  CHECK(ps.table_error() < 2e-2);
  CHECK(ps.deriv_sum_bound() > 1.0);
  CHECK(ps.deriv_sum_bound() < 20.0);

  // brute force over every grid point, independent of the staged scan
  const long pts = ps.fine_points();
  double brute = 0.0;
  for (long i = 0; i < pts; ++i) {
    brute = std::max(brute, std::fabs(ps.value_at(0, i)));
  }
  REQUIRE(ps.sup_one(0) == brute);

  // the table process is constant between consecutive cell boundaries
  const long block = 1L << (13 - 10);
  for (long b = 0; b < 16; ++b) {
    double v0 = ps.value_at(0, b * block);
    for (long i = 1; i < block; ++i) {
      CHECK(ps.value_at(0, b * block + i) == v0);
    }
  }
}

TEST_CASE("deepening the grid never lowers a path maximum") {
  PathSampler coarse(db6_config(3, 13, 10), kCtx);
  PathSampler fine(db6_config(3, 14, 10), kCtx);
  for (int r = 0; r < 10; ++r) {
    double a = coarse.sup_one(r);
    double b = fine.sup_one(r);
    REQUIRE(b >= a);
  }
}

TEST_CASE("configuration invariants are enforced") {
  CHECK_THROWS_AS(PathSampler(haar_config(-1, 6), kCtx),
                  std::invalid_argument);
  CHECK_THROWS_AS(PathSampler(haar_config(29, 6), kCtx),
                  std::invalid_argument);
  CHECK_THROWS_AS(PathSampler(haar_config(3, 2), kCtx),
                  std::invalid_argument);  // grid_depth below 3 + phi level
  CHECK_THROWS_AS(PathSampler(haar_config(3, 27), kCtx),
                  std::invalid_argument);
  {
    SimulationConfig cfg = haar_config(3, 6);
    cfg.reps = 0;
    CHECK_THROWS_AS(PathSampler(cfg, kCtx), std::invalid_argument);
  }
  {
    SimulationConfig cfg = haar_config(3, 6);
    cfg.coarse_depth = 0;
    CHECK_THROWS_AS(PathSampler(cfg, kCtx), std::invalid_argument);
  }
  {
    SimulationConfig cfg = db6_config(3, 13, 10);
    cfg.phi_level = 0;
    CHECK_THROWS_AS(PathSampler(cfg, kCtx), std::invalid_argument);
  }
  {
    SimulationConfig cfg = db6_config(3, 13, 10);
    cfg.grid_depth = cfg.phi_level + 2;  // grid no finer than the cells
    CHECK_THROWS_AS(PathSampler(cfg, kCtx), std::invalid_argument);
  }
  {
    SimulationConfig cfg;
    cfg.family = Family::custom;
    cfg.bank_path.clear();
    CHECK_THROWS_AS(PathSampler(cfg, kCtx), std::invalid_argument);
  }
  {
    // a scheme without verified constants cannot price thresholds
    SimulationConfig cfg = haar_config(3, 6);
    cfg.gammas = {0.1};
    CHECK_THROWS_AS((void)mc_exceedance(cfg, kCtx), std::invalid_argument);
  }
  {
    SimulationConfig cfg = db6_config(3, 13, 10);
    cfg.gammas = {};
    CHECK_THROWS_AS((void)mc_exceedance(cfg, kCtx), std::invalid_argument);
    cfg.gammas = {0.0};
    CHECK_THROWS_AS((void)mc_exceedance(cfg, kCtx), std::invalid_argument);
    cfg.gammas = {1.0};
    CHECK_THROWS_AS((void)mc_exceedance(cfg, kCtx), std::invalid_argument);
    cfg.gammas = {0.1};
    cfg.j = 0;
    cfg.grid_depth = 13;
    CHECK_THROWS_AS((void)mc_exceedance(cfg, kCtx), std::invalid_argument);
  }
}

TEST_CASE("variance calibration at the localized maximizer") {
  SimulationConfig cfg = db6_config(4, 13, 10);
  cfg.reps = 4000;
  cfg.seed = 31;
  PathSampler ps(cfg, kCtx);
  const VerificationReport& vr = ps.verification();

  // centre of the certified maximizer cell, shifted into an interior period
  const long lvl = vr.t0_enclosure.level;
  const double frac =
      (vr.t0_enclosure.a.get_d() + 0.5) / std::ldexp(1.0, static_cast<int>(lvl));
  const long m = cfg.grid_depth;
  const long idx =
      (2L << m) + static_cast<long>(std::floor(frac * std::ldexp(1.0, static_cast<int>(m))));

  double sum = 0.0, sumsq = 0.0;
  for (long r = 0; r < cfg.reps; ++r) {
    double v = ps.value_at(static_cast<std::uint64_t>(r), idx);
    sum += v;
    sumsq += v * v;
  }
  const double n = static_cast<double>(cfg.reps);
  const double mean = sum / n;
  const double var = (sumsq - n * mean * mean) / (n - 1.0);
  const double band = 4.0 / std::sqrt(n);
  CHECK(std::fabs(mean) <= band);
  // at the variance maximum E[X^2] = 1 by construction of the normalizer
  CHECK(std::fabs(var - 1.0) <= band + 0.02);
}

TEST_CASE("unit scheme exceedance matches the closed form oracle") {
  for (long j : {3L, 6L}) {
    SimulationConfig cfg = haar_config(j, 6);
    cfg.reps = 20000;
    cfg.seed = 11;
    PathSampler ps(cfg, kCtx);
    std::vector<double> sups;
    for (long r = 0; r < cfg.reps; ++r) sups.push_back(ps.sup_one(r));
    for (double u : {1.0, 2.0, 3.0}) {
      long cnt = 0;
      for (double s : sups) {
        if (s > u) ++cnt;
      }
      double frac = static_cast<double>(cnt) / static_cast<double>(cfg.reps);
      double exact = haar_exact_exceedance(j, u, kCtx);
      double se = std::sqrt(exact * (1.0 - exact) /
                            static_cast<double>(cfg.reps));
      // 99.9% binomial band
      CHECK(std::fabs(frac - exact) <= 3.2905 * se + 1e-9);
    }
  }
}

TEST_CASE("exact exceedance oracle closed forms") {
  CHECK(haar_exact_exceedance(5, 0.0, kCtx) == 1.0);
  for (double u : {0.5, 1.0, 2.0}) {
    double direct =
        2.0 * (1.0 -
               iv_normal_cdf(Interval::point_double(u, kCtx), kCtx).mid_double());
    CHECK(haar_exact_exceedance(0, u, kCtx) ==
          doctest::Approx(direct).epsilon(1e-15));
  }
  // frozen reference from an independent 50-digit evaluation
  CHECK(haar_exact_exceedance(3, 2.0, kCtx) ==
        doctest::Approx(0.31102018076982035).epsilon(1e-12));

  double prev = 1.1;
  for (double u : {0.5, 1.0, 1.5, 2.0, 2.5, 3.0}) {
    double p = haar_exact_exceedance(5, u, kCtx);
    CHECK(p < prev);
    prev = p;
  }
  CHECK(haar_exact_exceedance(6, 2.0, kCtx) >
        haar_exact_exceedance(3, 2.0, kCtx));

  CHECK_THROWS_AS((void)haar_exact_exceedance(3, -0.5, kCtx),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)haar_exact_exceedance(-1, 1.0, kCtx),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)haar_exact_exceedance(41, 1.0, kCtx),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      (void)haar_exact_exceedance(3, std::nan(""), kCtx),
      std::invalid_argument);
}

TEST_CASE("exceedance reports are reproducible and internally consistent") {
  SimulationConfig cfg = db6_config(5, 13, 10);
  cfg.reps = 400;
  cfg.seed = 9;
  cfg.gammas = {0.3, 0.1, 0.02};

  SimulationReport r1 = mc_exceedance(cfg, kCtx);
  SimulationReport r2 = mc_exceedance(cfg, kCtx);
  REQUIRE(r1.sups.size() == 400);
  REQUIRE(r1.sups == r2.sups);
  CHECK(r1.ks_distance == r2.ks_distance);
  CHECK(r1.grid_sup_bias_bound == r2.grid_sup_bias_bound);

  SimulationConfig threaded = cfg;
  threaded.threads = 4;
  SimulationReport r4 = mc_exceedance(threaded, kCtx);
  REQUIRE(r4.sups == r1.sups);
  CHECK(r4.ks_distance == r1.ks_distance);

  REQUIRE(r1.rows.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const GammaRow& row = r1.rows[i];
    CHECK(row.gamma == cfg.gammas[i]);
    CHECK(row.threshold ==
          normalized_threshold({5.0, row.gamma}, r1.upsilon.mid_double()));
    long cnt = 0;
    for (double s : r1.sups) {
      if (s > row.threshold) ++cnt;
    }
    CHECK(row.exceed_count == cnt);
    CHECK(row.exceed_fraction == doctest::Approx(cnt / 400.0));
    CHECK(row.ratio == doctest::Approx(row.exceed_fraction / row.gamma));
    CHECK(row.stderr_binomial ==
          doctest::Approx(std::sqrt(row.exceed_fraction *
                                    (1.0 - row.exceed_fraction) / 400.0)));
  }
  // larger thresholds cannot be exceeded more often
  CHECK(r1.rows[0].threshold < r1.rows[1].threshold);
  CHECK(r1.rows[1].threshold < r1.rows[2].threshold);
  CHECK(r1.rows[0].exceed_count >= r1.rows[1].exceed_count);
  CHECK(r1.rows[1].exceed_count >= r1.rows[2].exceed_count);

  CHECK(r1.a_j == a_of(5.0));
  CHECK(r1.b_j == b_of(5.0, r1.upsilon.mid_double()));
  CHECK(r1.ks_distance > 0.0);
  CHECK(r1.ks_distance < 1.0);
  CHECK(r1.zmax > 0.0);
  CHECK(r1.sup_min <= r1.sup_mean);
  CHECK(r1.sup_mean <= r1.sup_max);
  CHECK(r1.rep_warning);  // 400 < 100 / 0.02
  CHECK_FALSE(r1.note.empty());
  CHECK((r1.kernel == "scalar" || r1.kernel == "avx2" || r1.kernel == "neon"));

  PathSampler ps(cfg, kCtx);
  const int taps = 2 * ps.bank().K - 1;
  double bias = (ps.deriv_sum_bound() *
                     std::ldexp(1.0, static_cast<int>(-cfg.grid_depth - 1)) +
                 taps * ps.table_error()) *
                r1.zmax;
  CHECK(r1.grid_sup_bias_bound == doctest::Approx(bias).epsilon(1e-12));
  CHECK(r1.grid_sup_bias_bound < 1.0);

  SimulationConfig quiet = cfg;
  quiet.gammas = {0.5};
  SimulationReport r5 = mc_exceedance(quiet, kCtx);
  CHECK_FALSE(r5.rep_warning);
}

TEST_CASE("threshold scale factors cancel in exceedance indicators") {
  BandConstants half;
  half.sigma_bar_sq = Interval::from_strings("1.2517", "1.2518", kCtx);
  half.upsilon = Interval::from_strings("0.2219", "0.2220", kCtx);
  half.sigma = 0.5;
  BandConstants unit = half;
  unit.sigma = 1.0;

  SimulationConfig cfg = db6_config(4, 13, 10);
  PathSampler ps(cfg, kCtx);
  const CriticalQuery q{4.0, 0.1};
  const double thr = normalized_threshold(q, half.upsilon.mid_double());
  const double u_half = critical_value(q, half);
  const double u_unit = critical_value(q, unit);
  CHECK(u_half == doctest::Approx(2.0 * u_unit).epsilon(1e-15));
  CHECK(u_half / c_of(q.j, half) ==
        doctest::Approx(u_unit / c_of(q.j, unit)).epsilon(1e-14));
  for (int r = 0; r < 20; ++r) {
    double s = ps.sup_one(r);
    bool direct = s > thr;
    bool via_half = s * c_of(q.j, half) > u_half;
    bool via_unit = s * c_of(q.j, unit) > u_unit;
    CHECK(direct == via_half);
    CHECK(direct == via_unit);
  }
}

TEST_CASE("convenience wrapper matches a persistent sampler") {
  SimulationConfig cfg = db6_config(2, 13, 10);
  cfg.constants_tol = 1e-2;
  PathSampler ps(cfg, kCtx);
  CHECK(simulate_sup(cfg, 3, kCtx) == ps.sup_one(3));
}

TEST_CASE("kernel identity certifies the change of basis") {
  FilterBank haar = daubechies_filter(1, kCtx);
  KernelIdentityResult hr = kernel_identity_check(haar, 0, 2, 6, 4, kCtx);
  CHECK(hr.table_eps == 0.0);
  CHECK(hr.max_deviation <= 1e-12);
  CHECK(hr.separated_max <= 1e-12);
  CHECK(hr.diag_min == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(hr.diag_max == doctest::Approx(4.0).epsilon(1e-12));

  FilterBank db6 = daubechies_filter(6, kCtx);
  KernelIdentityResult kr = kernel_identity_check(db6, 3, 6, 9, 9, kCtx);
  CHECK(kr.table_eps > 0.0);
  CHECK(kr.phi_abs_max > 0.9);
  CHECK(kr.phi_abs_max < 1.5);
  // the deviation is controlled by the accumulated table error across the
  // level-j side of the identity
  CHECK(kr.max_deviation <= 10.0 * 64.0 * kr.table_eps);
  CHECK(kr.separated_max <= 1e-12);
  CHECK(kr.diag_min > 0.5 * 64.0);
  CHECK(kr.diag_max < 1.5 * 64.0);

  // a finer value table gives a smaller certified per-value error
  KernelIdentityResult fine = kernel_identity_check(db6, 3, 6, 11, 11, kCtx);
  CHECK(fine.table_eps < kr.table_eps);
  CHECK(fine.max_deviation <= 10.0 * 64.0 * fine.table_eps);

  // collapsing the telescopes is exact
  KernelIdentityResult same = kernel_identity_check(db6, 4, 4, 6, 8, kCtx);
  CHECK(same.max_deviation == 0.0);

  CHECK_THROWS_AS((void)kernel_identity_check(db6, 3, 2, 9, 9, kCtx),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)kernel_identity_check(db6, -1, 2, 9, 9, kCtx),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)kernel_identity_check(db6, 3, 6, 5, 9, kCtx),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)kernel_identity_check(db6, 3, 6, 9, 0, kCtx),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)kernel_identity_check(db6, 3, 6, 23, 9, kCtx),
                  std::invalid_argument);
}
