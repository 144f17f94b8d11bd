#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sbr/cascade.hpp"
#include "sbr/filters.hpp"
#include "sbr/interval.hpp"
#include "sbr/verify.hpp"

using namespace sbr;

namespace {

const PrecisionContext kCtx{256};

Interval box(const char* lo, const char* hi) {
  return Interval::from_strings(lo, hi, kCtx);
}

// Hand-built cellwise enclosure: every cell carries the same value interval.
FunctionEnclosure flat_enclosure(int n, long j, int K, const TorusWindow& w,
                                 const Interval& value, const Interval& eps) {
  FunctionEnclosure e;
  e.n = n;
  e.j = j;
  e.K = K;
  e.window = w;
  e.lo = w.a - 2 * K + 2;
  e.hi = w.b;
  const long cnt = mpz_class(e.hi - e.lo + 1).get_si();
  e.cells.assign(static_cast<std::size_t>(cnt) *
                     static_cast<std::size_t>(2 * K - 1),
                 value);
  e.eps = eps;
  return e;
}

SigmaEnclosure flat_sigma(long j, const TorusWindow& w, const Interval& s0,
                          const Interval& s1, const Interval& s2) {
  SigmaEnclosure se;
  se.j = j;
  se.window = w;
  const long cnt = w.cell_count().get_si();
  se.s0.assign(static_cast<std::size_t>(cnt), s0);
  se.s1.assign(static_cast<std::size_t>(cnt), s1);
  se.s2.assign(static_cast<std::size_t>(cnt), s2);
  return se;
}

bool nonincreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1] + 1e-15) return false;
  return true;
}

}  // namespace

TEST_CASE("banks without enough vanishing moments are rejected up front") {
  for (int n : {1, 2}) {
    CAPTURE(n);
    VerificationReport rep =
        verify_assumption(Family::daubechies, n, 1e-4, 40, kCtx);
    CHECK_FALSE(rep.verified);
    CHECK(rep.j_final == 0);
    CHECK(rep.note.find("vanishing moments") != std::string::npos);
    CHECK(std::isinf(rep.sigma_bar_sq.width_double()));
  }
  VerificationReport sym3 = verify_assumption(Family::symlet, 3, 1e-4, 40, kCtx);
  CHECK_FALSE(sym3.verified);
  CHECK_FALSE(sym3.note.empty());
}

TEST_CASE("invalid tolerances and level caps throw") {
  FilterBank bank = daubechies_filter(4, kCtx);
  CHECK_THROWS_AS(verify_assumption(bank, 0.0, 40, kCtx),
                  std::invalid_argument);
  CHECK_THROWS_AS(verify_assumption(bank, -1e-3, 40, kCtx),
                  std::invalid_argument);
  CHECK_THROWS_AS(verify_assumption(bank, 1e-3, 0, kCtx),
                  std::invalid_argument);
}

TEST_CASE("unit indicator scheme gives exact variance cells") {
  // K = 1 and phi identically one on its support: sigma^2 is exactly 1
  // everywhere, derivatives vanish, and nothing is rounded.
  const long j = 3;
  const TorusWindow full = TorusWindow::full(j);
  const Interval one = Interval::point_si(1, kCtx);
  const Interval zero = Interval::point_si(0, kCtx);
  FunctionEnclosure p0 = flat_enclosure(0, j, 1, full, one, zero);
  FunctionEnclosure p1 = flat_enclosure(1, j, 1, full, zero, zero);
  FunctionEnclosure p2 = flat_enclosure(2, j, 1, full, zero, zero);

  SigmaEnclosure se = sigma_enclosure(p0, p1, p2, full, kCtx);
  REQUIRE(se.count() == 8);
  for (long o = 0; o < se.count(); ++o) {
    const auto i = static_cast<std::size_t>(o);
    CHECK(mpfr_cmp_si(se.s0[i].lo().get(), 1) == 0);
    CHECK(mpfr_cmp_si(se.s0[i].hi().get(), 1) == 0);
    CHECK(mpfr_zero_p(se.s1[i].lo().get()));
    CHECK(mpfr_zero_p(se.s1[i].hi().get()));
    CHECK(mpfr_zero_p(se.s2[i].lo().get()));
    CHECK(mpfr_zero_p(se.s2[i].hi().get()));
  }

  TorusWindow cand = candidate_interval(se);
  CHECK(cand.full_flag);
  CHECK(cand.level == j);

  Interval mean = torus_mean_sigma(p0, kCtx);
  CHECK(mpfr_cmp_si(mean.lo().get(), 1) == 0);
  CHECK(mpfr_cmp_si(mean.hi().get(), 1) == 0);
}

TEST_CASE("candidate interval wraps, localises, and rejects empty sets") {
  const long j = 4;
  const TorusWindow full = TorusWindow::full(j);
  const Interval lowc = box("0.5", "0.6");
  const Interval peak = box("1.0", "1.1");
  const Interval near0 = box("-0.1", "0.1");
  const Interval curv = box("-1", "-0.5");

  SUBCASE("peaks astride the seam give a wrapped arc") {
    SigmaEnclosure se = flat_sigma(j, full, lowc, near0, curv);
    se.s0[0] = peak;
    se.s0[15] = peak;
    TorusWindow w = candidate_interval(se);
    CHECK_FALSE(w.full_flag);
    CHECK(w.a == 15);
    CHECK(w.b == 16);
    CHECK(w.cell_count() == 2);
  }

  SUBCASE("a single surviving cell pins the maximiser") {
    SigmaEnclosure se = flat_sigma(j, full, lowc, near0, curv);
    se.s0[5] = peak;
    TorusWindow w = candidate_interval(se);
    CHECK(w.a == 5);
    CHECK(w.b == 5);
  }

  SUBCASE("a monotone derivative excludes cells the values cannot") {
    SigmaEnclosure se = flat_sigma(j, full, peak, box("0.2", "0.3"), curv);
    se.s1[9] = near0;
    TorusWindow w = candidate_interval(se);
    CHECK(w.a == 9);
    CHECK(w.b == 9);
  }

  SUBCASE("no candidate cell is a logic error") {
    SigmaEnclosure se = flat_sigma(j, full, peak, box("0.2", "0.3"), curv);
    CHECK_THROWS_AS(candidate_interval(se), std::logic_error);
  }
}

TEST_CASE("candidate hull over a windowed parent stays on its line") {
  const long j = 4;
  const TorusWindow parent = TorusWindow::arc(j, 14, 17);
  const Interval lowc = box("0.5", "0.6");
  const Interval peak = box("1.0", "1.1");
  const Interval near0 = box("-0.1", "0.1");
  const Interval curv = box("-1", "-0.5");

  SUBCASE("candidates past the seam come back canonical") {
    SigmaEnclosure se = flat_sigma(j, parent, lowc, near0, curv);
    se.s0[2] = peak;
    se.s0[3] = peak;
    TorusWindow w = candidate_interval(se);
    CHECK(w.a == 0);
    CHECK(w.b == 1);
  }

  SUBCASE("spread candidates keep the full parent span") {
    SigmaEnclosure se = flat_sigma(j, parent, lowc, near0, curv);
    se.s0[0] = peak;
    se.s0[3] = peak;
    TorusWindow w = candidate_interval(se);
    CHECK(w.a == 14);
    CHECK(w.b == 17);
  }
}

TEST_CASE("curvature ratio enclosure matches a manual evaluation") {
  const long j = 3;
  const TorusWindow cell = TorusWindow::arc(j, 2, 2);
  SigmaEnclosure se = flat_sigma(j, cell, box("1.2", "1.21"),
                                 box("-0.01", "0.01"), box("-3.1", "-2.9"));
  FunctionEnclosure p1 = flat_enclosure(1, j, 1, cell, box("0.7", "0.71"),
                                        Interval::point_double(1e-9, kCtx));
  const Interval sbsq = box("1.2", "1.21");

  Interval u1 = upsilon_enclosure(se, p1, sbsq, kCtx);
  CHECK(box("0.31", "0.35").contains(u1));
  CHECK(u1.strictly_positive());

  // Same quantity assembled through the square root: wider but overlapping.
  Interval padded = box("0.7", "0.71");
  mpfr_sub_d(padded.lo().get(), padded.lo().get(), 1e-9, MPFR_RNDD);
  mpfr_add_d(padded.hi().get(), padded.hi().get(), 1e-9, MPFR_RNDU);
  Interval num = iv_sqr(padded, kCtx);
  Interval den = box("-3.1", "-2.9");
  Interval sigma = iv_sqrt(sbsq, kCtx);
  Interval half = iv_div(den, iv_mul_2si(sigma, 1, kCtx), kCtx);
  Interval u2 = iv_neg(iv_div(num, iv_mul(sigma, half, kCtx), kCtx), kCtx);
  CHECK(u2.intersects(u1));
  CHECK(u2.width_double() >= u1.width_double());
  CHECK(std::fabs(u2.mid_double() - u1.mid_double()) < 1e-3);

  SUBCASE("an indefinite second derivative is not accepted") {
    se.s2[0] = box("-1", "0.1");
    CHECK_THROWS_WITH_AS(upsilon_enclosure(se, p1, sbsq, kCtx),
                         "denominator not certified negative", IntervalError);
  }
  SUBCASE("a variance bound touching zero is rejected") {
    CHECK_THROWS_AS(upsilon_enclosure(se, p1, box("-1", "1"), kCtx),
                    std::invalid_argument);
  }
}

TEST_CASE("torus mean of the squared scheme stays pinned to one") {
  FilterBank bank = daubechies_filter(6, kCtx);
  CascadeLadder lad(bank, 3, kCtx);
  for (long j = 1; j <= 8; ++j) lad.step(TorusWindow::full(j));

  FunctionEnclosure e0 = lad.enclosure(0);
  Interval mean = torus_mean_sigma(e0, kCtx);
  CHECK(mean.contains_si(1));
  CHECK(mean.width_double() <= 1e-50);

  // Padded cell bounds must cover the known variance maximum from either
  // side; the 6-decimal reference value is 1.251716.
  FunctionEnclosure e1 = lad.enclosure(1);
  FunctionEnclosure e2 = lad.enclosure(2);
  SigmaEnclosure se = sigma_enclosure(e0, e1, e2, lad.window(), kCtx);
  double maxlo = -1.0, maxhi = -1.0;
  for (long o = 0; o < se.count(); ++o) {
    const auto i = static_cast<std::size_t>(o);
    maxlo = std::max(maxlo, se.s0[i].lo_double());
    maxhi = std::max(maxhi, se.s0[i].hi_double());
  }
  CHECK(maxhi >= 1.251716);
  CHECK(maxlo <= 1.251717);
  CHECK_NOTHROW(candidate_interval(se));
}

TEST_CASE("missing translates and mismatched inputs are reported") {
  FilterBank bank = daubechies_filter(3, kCtx);
  const TorusWindow win = TorusWindow::arc(3, 2, 4);
  FunctionEnclosure e0 = cascade_f(bank, 0, 3, win, kCtx, true);
  FunctionEnclosure e1 = cascade_f(bank, 1, 3, win, kCtx, true);
  FunctionEnclosure e2 = cascade_f(bank, 2, 3, win, kCtx, true);

  CHECK_THROWS_WITH_AS(
      sigma_enclosure(e0, e1, e2, TorusWindow::full(3), kCtx),
      "missing coverage of a required shift", IntervalError);
  CHECK_THROWS_AS(sigma_enclosure(e1, e1, e2, win, kCtx),
                  std::invalid_argument);
  CHECK_THROWS_AS(sigma_enclosure(e0, e1, e2, TorusWindow::full(4), kCtx),
                  std::invalid_argument);

  SigmaEnclosure se = sigma_enclosure(e0, e1, e2, win, kCtx);
  FunctionEnclosure deeper = cascade_f(bank, 1, 4, TorusWindow::full(4), kCtx,
                                       true);
  CHECK_THROWS_AS(upsilon_enclosure(se, deeper, box("1", "2"), kCtx),
                  std::invalid_argument);

  CHECK_THROWS_AS(torus_mean_sigma(e1, kCtx), std::invalid_argument);
  CHECK_THROWS_AS(torus_mean_sigma(e0, kCtx), std::invalid_argument);
}

TEST_CASE("a well-behaved bank verifies and brackets its constants") {
  VerificationReport rep =
      verify_assumption(Family::daubechies, 8, 1e-2, 40, kCtx);
  REQUIRE(rep.verified);
  CHECK(rep.family == Family::daubechies);
  CHECK(rep.N == 8);
  CHECK(rep.precision_bits == 256);
  CHECK(rep.j_final >= 8);
  CHECK(rep.j_final == rep.I_final.level);
  CHECK(rep.note.empty());

  // 6-decimal reference values for this bank: 1.250928 and 0.266316.
  CHECK(rep.sigma_bar_sq.width_double() <= 1e-2);
  CHECK(rep.sigma_bar_sq.intersects(box("1.2509275", "1.2509285")));
  CHECK(rep.sigma_bar_sq.lo_double() >= 1.0);
  CHECK(rep.upsilon.width_double() <= 1e-2);
  CHECK(rep.upsilon.intersects(box("0.2663155", "0.2663165")));
  CHECK(rep.upsilon.strictly_positive());
  CHECK(rep.second_deriv_upper.strictly_negative());

  CHECK(rep.sigma_width_trace.size() == rep.window_width_trace.size());
  CHECK(nonincreasing(rep.sigma_width_trace));
  CHECK(nonincreasing(rep.window_width_trace));
  CHECK(rep.window_width_trace.back() < 1.0);
  CHECK(rep.t0_enclosure.level == rep.j_final);
  CHECK(rep.t0_enclosure.cell_count() >= 1);
}

TEST_CASE("an explicit bank runs through the same loop") {
  FilterBank bank = daubechies_filter(6, kCtx);
  VerificationReport rep = verify_assumption(bank, 3e-2, 40, kCtx);
  REQUIRE(rep.verified);
  CHECK(rep.family == Family::daubechies);
  CHECK(rep.N == 6);
  CHECK(rep.sigma_bar_sq.strictly_positive());
  CHECK(rep.upsilon.strictly_positive());
}

TEST_CASE("low-regularity banks localise but fail the curvature check") {
  // The squared scheme has a sharp maximum even at N = 3, but its second
  // derivative is not a bounded function, so no negativity certificate can
  // exist and the report must say so instead of claiming success.
  VerificationReport rep =
      verify_assumption(Family::daubechies, 3, 1e-3, 16, kCtx);
  CHECK_FALSE(rep.verified);
  CHECK_FALSE(rep.note.empty());
  CHECK(rep.sigma_bar_sq.width_double() <= 1e-3);
  CHECK(rep.window_width_trace.back() < 1e-2);
  CHECK_FALSE(rep.upsilon.is_finite());
}
