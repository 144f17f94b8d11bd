#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <utility>
#include <vector>

#include "sbr/cascade.hpp"
#include "sbr/filters.hpp"
#include "sbr/interval.hpp"

using namespace sbr;

namespace {

const PrecisionContext kCtx{256};

bool same_strings(const Interval& a, const Interval& b) {
  return a.to_strings() == b.to_strings();
}

bool is_exact_si(const Interval& a, long v) {
  return mpfr_cmp_si(a.lo().get(), v) == 0 &&
         mpfr_cmp_si(a.hi().get(), v) == 0;
}

Interval iv_from_q(const mpq_class& q, const PrecisionContext& ctx) {
  Interval r(ctx.precision_bits);
  mpfr_set_q(r.lo().get(), q.get_mpq_t(), MPFR_RNDD);
  mpfr_set_q(r.hi().get(), q.get_mpq_t(), MPFR_RNDU);
  return r;
}

Interval pad_by(const Interval& cell, const Real& rad,
                const PrecisionContext& ctx) {
  Interval r(ctx.precision_bits);
  mpfr_sub(r.lo().get(), cell.lo().get(), rad.get(), MPFR_RNDD);
  mpfr_add(r.hi().get(), cell.hi().get(), rad.get(), MPFR_RNDU);
  return r;
}

// value a + b*sqrt(3) with exact rational parts
struct Q3 {
  mpq_class a, b;
};

Q3 q3_add(const Q3& x, const Q3& y) { return {x.a + y.a, x.b + y.b}; }

Q3 q3_mul(const Q3& x, const Q3& y) {
  return {x.a * y.a + 3 * x.b * y.b, x.a * y.b + x.b * y.a};
}

mpq_class q_of(long num, long den) {
  mpq_class q(num, den);
  q.canonicalize();
  return q;
}

// exact dyadic samples of the order-2 Daubechies scaling function on
// [-1, 2], normalized so the integer samples sum to 1
class Db2Oracle {
 public:
  Db2Oracle() {
    u_[0] = {q_of(1, 4), q_of(1, 4)};
    u_[1] = {q_of(3, 4), q_of(1, 4)};
    u_[2] = {q_of(3, 4), q_of(-1, 4)};
    u_[3] = {q_of(1, 4), q_of(-1, 4)};
  }

  Q3 phi(const mpq_class& x) {
    if (x <= -1 || x >= 2) return {0, 0};
    if (x == 0) return {q_of(1, 2), q_of(1, 2)};
    if (x == 1) return {q_of(1, 2), q_of(-1, 2)};
    auto it = memo_.find(x);
    if (it != memo_.end()) return it->second;
    Q3 acc{0, 0};
    for (int k = 0; k < 4; ++k) {
      mpq_class y = 2 * x + 1 - k;
      Q3 inner = phi(y);
      acc = q3_add(acc, q3_mul(u_[k], inner));
    }
    memo_.emplace(x, acc);
    return acc;
  }

  Interval enclose(const mpq_class& x, const PrecisionContext& ctx) {
    Q3 v = phi(x);
    Interval s3 = iv_sqrt(Interval::point_si(3, ctx), ctx);
    return iv_add(iv_from_q(v.a, ctx), iv_mul(iv_from_q(v.b, ctx), s3, ctx),
                  ctx);
  }

 private:
  Q3 u_[4];
  std::map<mpq_class, Q3> memo_;
};

}  // namespace

TEST_CASE("window index sets follow the two-scale geometry") {
  WindowIndexSet own = window_indices(6, 10, 20, 6, 4);
  CHECK(own.lo == 10 - 6);
  CHECK(own.hi == 20);

  WindowIndexSet one = window_indices(6, 10, 20, 5, 4);
  CHECK(one.lo == 5 - 6);
  CHECK(one.hi == 10);

  WindowIndexSet single = window_indices(8, 37, 37, 8, 5);
  CHECK(single.count() == 2 * 5 - 1);

  WindowIndexSet full = window_indices(7, 0, 127, 3, 4);
  CHECK(full.lo == -6);
  CHECK(full.hi == 7);

  for (long l = 0; l <= 5; ++l) {
    WindowIndexSet direct = window_indices(6, 11, 53, l, 3);
    WindowIndexSet hop = window_indices(5, 11 / 2, 53 / 2, l, 3);
    CHECK(direct.lo == hop.lo);
    CHECK(direct.hi == hop.hi);
  }

  WindowIndexSet s = window_indices(5, 3, 7, 5, 2);
  CHECK(s.contains(3));
  CHECK(s.contains(7));
  CHECK(s.contains(1));   // 1 = 3 - 2 lies in [lo, hi] directly
  CHECK(s.contains(39));  // 7 + 32
  CHECK(!s.contains(8));
  CHECK_THROWS_AS(window_indices(4, 0, 3, 5, 2), std::invalid_argument);
}

TEST_CASE("torus window validation and flags") {
  TorusWindow f = TorusWindow::full(3);
  CHECK(f.full_flag);
  CHECK(f.a == 0);
  CHECK(f.b == 7);
  CHECK(f.cell_count() == 8);
  CHECK(f.modulus() == 8);

  CHECK(TorusWindow::arc(3, 0, 7).full_flag);
  CHECK(TorusWindow::arc(3, 2, 9).full_flag);  // wrap covering all residues
  TorusWindow w = TorusWindow::arc(3, 6, 9);
  CHECK(!w.full_flag);
  CHECK(w.cell_count() == 4);

  CHECK_THROWS_AS(TorusWindow::arc(3, 5, 4), std::invalid_argument);
  CHECK_THROWS_AS(TorusWindow::arc(3, -1, 4), std::invalid_argument);
  CHECK_THROWS_AS(TorusWindow::arc(3, 8, 9), std::invalid_argument);
  CHECK_THROWS_AS(TorusWindow::arc(3, 2, 16), std::invalid_argument);
}

TEST_CASE("cell index evaluation rule") {
  CHECK(cell_index(mpq_class(-1), 3, 2) == 0);
  CHECK(cell_index(q_of(1, 3), 3, 2) == 10);
  CHECK(cell_index(q_of(15, 8), 3, 2) == 23);
  CHECK(cell_index(mpq_class(0), 5, 4) == 3 * 32);
}

TEST_CASE("derived filters follow the alternating-sum recurrence") {
  FilterBank haar = daubechies_filter(1, kCtx);
  DerivedFilter h1 = derive_filter(haar, 1, kCtx);
  REQUIRE(h1.coeffs.size() == 2);
  CHECK(is_exact_si(h1.coeffs[0], 2));
  CHECK(is_exact_si(h1.coeffs[1], 0));
  CHECK_THROWS_WITH_AS(derive_filter(haar, 2, kCtx),
                       "derived filter order exceeds vanishing moments",
                       std::invalid_argument);

  FilterBank db2 = daubechies_filter(2, kCtx);
  DerivedFilter d0 = derive_filter(db2, 0, kCtx);
  for (int k = 0; k < 4; ++k) CHECK(d0.coeffs[k].intersects(db2.u0[k]));

  DerivedFilter d1 = derive_filter(db2, 1, kCtx);
  REQUIRE(d1.coeffs.size() == 4);
  // v_k = 2 sum_i (-1)^i u_{k-i}
  Interval v2 = iv_mul_2si(
      iv_add(iv_sub(db2.u0[2], db2.u0[1], kCtx), db2.u0[0], kCtx), 1, kCtx);
  CHECK(d1.coeffs[2].intersects(v2));
  CHECK(d1.coeffs[3].contains_zero());
  CHECK(d1.coeffs[3].width_double() < 1e-70);
  CHECK(std::abs(d1.coeffs[3].mid_double()) < 1e-70);

  DerivedFilter d2 = derive_filter(db2, 2, kCtx);
  CHECK(d2.coeffs.size() == 4);
  CHECK(d2.coeffs[0].is_finite());
}

TEST_CASE("level zero cascade is the unit impulse") {
  FilterBank db3 = daubechies_filter(3, kCtx);
  DerivedFilter f0 = derive_filter(db3, 0, kCtx);
  LevelData d = cascade_g(f0, 0, TorusWindow::full(0), kCtx);
  CHECK(d.level == 0);
  const Interval* at0 = d.lookup(0);
  REQUIRE(at0 != nullptr);
  CHECK(is_exact_si(*at0, 1));
  for (long k = 1; k <= 4; ++k) {
    const Interval* p = d.lookup(k);
    REQUIRE(p != nullptr);
    CHECK(is_exact_si(*p, 0));
  }
  CHECK(d.lookup(mpz_class(-1)) == nullptr);
  CHECK(d.lookup(mpz_class(5)) == nullptr);
}

TEST_CASE("haar cascade is exact with zero error at every level") {
  FilterBank haar = daubechies_filter(1, kCtx);
  for (long j : {0L, 3L, 7L}) {
    FunctionEnclosure e = cascade_f(haar, 0, j, TorusWindow::full(j), kCtx);
    CHECK(e.count() == (1 << j));
    for (long o = 0; o < e.count(); ++o) CHECK(is_exact_si(e.cell_at(o, 0), 1));
    CHECK(mpfr_zero_p(e.eps.lo().get()));
    CHECK(mpfr_zero_p(e.eps.hi().get()));
    CHECK(mpfr_zero_p(e.c_const.lo().get()));
    CHECK(mpfr_zero_p(e.c_const.hi().get()));
    if (j >= 1) {
      CHECK(is_exact_si(e.alpha, 0));
      CHECK(is_exact_si(alpha_bound(haar, 0, j, TorusWindow::full(j), kCtx), 0));
      CHECK(is_exact_si(
          error_constant(haar, 0, j, TorusWindow::full(j), kCtx), 0));
    }
  }

  // windowed Haar stays exact
  FunctionEnclosure w =
      cascade_f(haar, 0, 4, TorusWindow::arc(4, 5, 9), kCtx);
  for (long o = 0; o < w.count(); ++o) CHECK(is_exact_si(w.cell_at(o, 0), 1));
  CHECK(mpfr_zero_p(w.eps.hi().get()));
}

TEST_CASE("db2 cells enclose the exact scaling function at dyadic points") {
  Db2Oracle oracle;
  // closed forms at half-integers
  Interval at_mhalf = oracle.enclose(q_of(-1, 2), kCtx);
  Interval ref = iv_mul_2si(
      iv_add(Interval::point_si(2, kCtx),
             iv_sqrt(Interval::point_si(3, kCtx), kCtx), kCtx),
      -2, kCtx);
  CHECK(at_mhalf.intersects(ref));
  Q3 at_half = oracle.phi(q_of(1, 2));
  CHECK(at_half.a == 0);
  CHECK(at_half.b == 0);

  FilterBank db2 = daubechies_filter(2, kCtx);
  const long j = 6;
  FunctionEnclosure e = cascade_f(db2, 0, j, TorusWindow::full(j), kCtx);
  CHECK(e.alpha.lo_double() > 0.0);
  CHECK(e.alpha.hi_double() < 1.0);
  CHECK(e.eps.is_finite());
  REQUIRE(e.certificate_level >= 1);

  int checked = 0;
  for (long p = -64; p < 128; p += 3) {
    mpq_class x = q_of(p, 64);
    Interval truth = oracle.enclose(x, kCtx);
    const Interval& cell = e.cell(cell_index(x, j, e.K));
    Interval padded = pad_by(cell, e.eps.hi(), kCtx);
    CHECK(padded.intersects(truth));
    CHECK(padded.contains(truth));
    ++checked;
  }
  CHECK(checked == 64);
}

TEST_CASE("derivative enclosures without a certificate must be requested") {
  FilterBank db2 = daubechies_filter(2, kCtx);
  CHECK_THROWS_WITH_AS(cascade_f(db2, 1, 5, TorusWindow::full(5), kCtx),
                       "no contraction certificate at this level",
                       IntervalError);
  FunctionEnclosure e =
      cascade_f(db2, 1, 5, TorusWindow::full(5), kCtx, true);
  CHECK(e.certificate_level == -1);
  CHECK(mpfr_inf_p(e.eps.hi().get()));
  CHECK(e.count() == 32 + 2 * e.K - 2);
}

TEST_CASE("windowed cascade is bit-identical to the full run") {
  for (int N : {2, 3}) {
    FilterBank bank = daubechies_filter(N, kCtx);
    const long j = 7;
    FunctionEnclosure full =
        cascade_f(bank, 0, j, TorusWindow::full(j), kCtx, true);
    for (const TorusWindow& w :
         {TorusWindow::arc(j, 37, 58), TorusWindow::arc(j, 120, 130)}) {
      FunctionEnclosure part = cascade_f(bank, 0, j, w, kCtx, true);
      int compared = 0;
      for (long o = 0; o < part.count(); ++o) {
        mpz_class r = part.lo + o;
        mpz_class rho;
        mpz_fdiv_r_2exp(rho.get_mpz_t(), r.get_mpz_t(), 7);
        for (int m = 0; m < part.branches(); ++m) {
          mpz_class k = rho + mpz_class(1 << j) * m;
          const Interval* ref = full.find(k);
          REQUIRE(ref != nullptr);
          CHECK(same_strings(part.cell_at(o, m), *ref));
          ++compared;
        }
      }
      CHECK(compared == part.count() * part.branches());
    }

    // derivative cells share the same gather order
    FunctionEnclosure full1 =
        cascade_f(bank, 1, j, TorusWindow::full(j), kCtx, true);
    FunctionEnclosure part1 =
        cascade_f(bank, 1, j, TorusWindow::arc(j, 40, 44), kCtx, true);
    for (long o = 0; o < part1.count(); ++o)
      for (int m = 0; m < part1.branches(); ++m) {
        mpz_class k = part1.lo + o;
        mpz_class rho;
        mpz_fdiv_r_2exp(rho.get_mpz_t(), k.get_mpz_t(), 7);
        const Interval* ref = full1.find(rho + mpz_class(1 << j) * m);
        REQUIRE(ref != nullptr);
        CHECK(same_strings(part1.cell_at(o, m), *ref));
      }
  }
}

TEST_CASE("branch sums reproduce the partition of unity") {
  FilterBank db4 = daubechies_filter(4, kCtx);
  FunctionEnclosure full = cascade_f(db4, 0, 5, TorusWindow::full(5), kCtx);
  for (long o = 0; o < full.count(); ++o) {
    Interval s = Interval::point_si(0, kCtx);
    for (int m = 0; m < full.branches(); ++m)
      s = iv_add(s, full.cell_at(o, m), kCtx);
    CHECK(s.contains_si(1));
    CHECK(s.width_double() < 1e-60);
  }

  FunctionEnclosure part =
      cascade_f(db4, 0, 5, TorusWindow::arc(5, 3, 17), kCtx);
  for (long o = 0; o < part.count(); ++o) {
    Interval s = Interval::point_si(0, kCtx);
    for (int m = 0; m < part.branches(); ++m)
      s = iv_add(s, part.cell_at(o, m), kCtx);
    CHECK(s.contains_si(1));
  }
}

TEST_CASE("error bounds decay geometrically along the ladder") {
  FilterBank db8 = daubechies_filter(8, kCtx);
  CascadeLadder lad(db8, 1, kCtx);
  std::vector<double> eps_hi;
  for (long l = 1; l <= 12; ++l) {
    lad.step(TorusWindow::full(l));
    CascadeLadder::Certificate c = lad.certificate(0);
    if (c.valid) eps_hi.push_back(c.eps.hi().to_double(MPFR_RNDU));
  }
  REQUIRE(eps_hi.size() >= 6);
  double last = eps_hi.back();
  double sixth_from_end = eps_hi[eps_hi.size() - 7];
  CHECK(last < sixth_from_end / 32);  // roughly halves per level here
  CHECK(last < 0.1);

  CascadeLadder::Certificate fin = lad.certificate(0);
  CHECK(fin.from_level >= 1);
  CHECK(fin.from_level <= 12);

  // the best-over-levels bound is never worse than the final-level one
  Interval a12 = lad.alpha_at(0, 12);
  Interval c12 = lad.c_at(0, 12);
  Interval direct = iv_mul(
      c12,
      iv_pow2(iv_neg(iv_mul(a12, Interval::point_si(12, kCtx), kCtx), kCtx),
              kCtx),
      kCtx);
  CHECK(fin.eps.hi().to_double(MPFR_RNDU) <=
        direct.hi().to_double(MPFR_RNDU) * (1 + 1e-15));
}

TEST_CASE("certificate wrappers agree with the ladder") {
  FilterBank db6 = daubechies_filter(6, kCtx);
  Interval a = alpha_bound(db6, 0, 6, TorusWindow::full(6), kCtx);
  CHECK(a.lo_double() > 0.3);
  CHECK(a.hi_double() < 1.5);
  Interval c = error_constant(db6, 0, 6, TorusWindow::full(6), kCtx);
  CHECK(c.lo_double() > 0.0);
  CHECK(c.is_finite());
  CHECK_THROWS_AS(alpha_bound(db6, 0, 0, TorusWindow::full(0), kCtx),
                  std::invalid_argument);
}

TEST_CASE("ladder rejects windows that break the dependency cone") {
  FilterBank db2 = daubechies_filter(2, kCtx);
  CascadeLadder lad(db2, 0, kCtx);
  lad.step(TorusWindow::full(1));
  lad.step(TorusWindow::arc(2, 0, 1));
  lad.step(TorusWindow::arc(3, 0, 1));
  // level-3 cells 6..9 (mod 8) are retained; cell 4 of level 4 pulls level-3
  // cell 2, whose residue class is missing
  CHECK_THROWS_WITH_AS(lad.step(TorusWindow::arc(4, 4, 4)),
                       "window too small to cover dependency cone",
                       IntervalError);
  CHECK_THROWS_AS(lad.step(TorusWindow::arc(5, 0, 0)), std::invalid_argument);
}

TEST_CASE("wrapped arcs over a full parent level keep evolving") {
  FilterBank db2 = daubechies_filter(2, kCtx);
  CascadeLadder full(db2, 0, kCtx);
  CascadeLadder lad(db2, 0, kCtx);
  for (long l = 1; l <= 4; ++l) full.step(TorusWindow::full(l));
  for (long l = 1; l <= 2; ++l) lad.step(TorusWindow::full(l));
  lad.step(TorusWindow::arc(3, 6, 9));    // wraps the seam
  lad.step(TorusWindow::arc(4, 12, 19));  // its evolution keeps wrapping
  const LevelData& a = lad.data(0);
  const LevelData& b = full.data(0);
  for (long o = 0; o < a.count(); ++o) {
    mpz_class k = a.lo + o;
    mpz_fdiv_r_2exp(k.get_mpz_t(), k.get_mpz_t(), 4);
    for (int m = 0; m < a.branches(); ++m) {
      const Interval* ref = b.lookup(k + mpz_class(16) * m);
      REQUIRE(ref != nullptr);
      CHECK(same_strings(a.at(o, m), *ref));
    }
  }
}

TEST_CASE("retained-cell lookup by absolute index") {
  FilterBank db3 = daubechies_filter(3, kCtx);
  FunctionEnclosure e =
      cascade_f(db3, 0, 5, TorusWindow::arc(5, 10, 20), kCtx, true);
  CHECK(e.lo == 6);
  CHECK(e.hi == 20);
  CHECK_NOTHROW(e.cell(mpz_class(6)));
  CHECK_NOTHROW(e.cell(mpz_class(20 + 32 * 4)));
  CHECK(e.find(mpz_class(25)) == nullptr);
  CHECK(e.find(mpz_class(-3)) == nullptr);
  CHECK(e.find(mpz_class(32 * 5)) == nullptr);  // branch out of range
  CHECK_THROWS_AS(e.cell(mpz_class(25)), IntervalError);
}

TEST_CASE("cascade runs are deterministic") {
  FilterBank db5 = daubechies_filter(5, kCtx);
  FunctionEnclosure a = cascade_f(db5, 0, 6, TorusWindow::full(6), kCtx);
  FunctionEnclosure b = cascade_f(db5, 0, 6, TorusWindow::full(6), kCtx);
  REQUIRE(a.cells.size() == b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); i += 17)
    CHECK(same_strings(a.cells[i], b.cells[i]));
  CHECK(same_strings(a.eps, b.eps));
  CHECK(same_strings(a.alpha, b.alpha));
}
