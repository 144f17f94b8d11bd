#include "sbr/filters.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <utility>

#include <gmpxx.h>

namespace sbr {

namespace {

using CD = std::complex<double>;
using PolyZ = std::vector<mpz_class>;
using PolyI = std::vector<Interval>;

mpz_class binom_z(unsigned long n, unsigned long k) {
  mpz_class r;
  mpz_bin_uiui(r.get_mpz_t(), n, k);
  return r;
}

Interval iv_zero(mpfr_prec_t prec) {
  Interval r{prec};
  mpfr_set_zero(r.lo().get(), 1);
  mpfr_set_zero(r.hi().get(), 1);
  return r;
}

Interval iv_one(mpfr_prec_t prec) {
  Interval r{prec};
  mpfr_set_ui(r.lo().get(), 1, MPFR_RNDD);
  mpfr_set_ui(r.hi().get(), 1, MPFR_RNDU);
  return r;
}

Interval iv_round_to(const Interval& a, const PrecisionContext& ctx) {
  Interval r{ctx.precision_bits};
  mpfr_set(r.lo().get(), a.lo().get(), MPFR_RNDD);
  mpfr_set(r.hi().get(), a.hi().get(), MPFR_RNDU);
  return r;
}

// Product filter in z: the unique degree 2N-2 integer polynomial with
//   W(z) = 4^(N-1) z^(N-1) P((2 - z - 1/z)/4),
//   P(y) = sum_{k<N} binom(N-1+k, k) y^k.
// Using 4 z y = -(z-1)^2 each term stays integral.
PolyZ product_zpoly(int N) {
  PolyZ w(2 * N - 1, mpz_class(0));
  for (int k = 0; k < N; ++k) {
    mpz_class scale = binom_z(N - 1 + k, k);
    mpz_class pw;
    mpz_ui_pow_ui(pw.get_mpz_t(), 4, static_cast<unsigned long>(N - 1 - k));
    scale *= pw;
    if (k & 1) scale = -scale;
    for (int j = 0; j <= 2 * k; ++j) {
      mpz_class term = binom_z(2 * k, j) * scale;
      if ((2 * k - j) & 1) term = -term;
      w[j + N - 1 - k] += term;
    }
  }
  return w;
}

PolyZ derive_z(const PolyZ& p) {
  PolyZ d(p.size() > 1 ? p.size() - 1 : 1, mpz_class(0));
  for (std::size_t k = 1; k < p.size(); ++k) d[k - 1] = p[k] * long(k);
  return d;
}

// ---- double precision root seeds -----------------------------------------

std::vector<CD> roots_durand_kerner(const std::vector<double>& a) {
  int n = static_cast<int>(a.size()) - 1;
  std::vector<CD> c(n);
  for (int k = 0; k < n; ++k) c[k] = a[k] / a[n];
  std::vector<CD> r(n);
  CD seed(0.4, 0.9);
  CD acc(1.0, 0.0);
  for (int i = 0; i < n; ++i) {
    acc *= seed;
    r[i] = acc;
  }
  for (int iter = 0; iter < 800; ++iter) {
    double step = 0.0;
    for (int i = 0; i < n; ++i) {
      CD v(1.0, 0.0);
      for (int k = n - 1; k >= 0; --k) v = v * r[i] + c[k];
      CD den(1.0, 0.0);
      for (int j = 0; j < n; ++j)
        if (j != i) den *= r[i] - r[j];
      CD d = v / den;
      r[i] -= d;
      step = std::max(step, std::abs(d) / (1.0 + std::abs(r[i])));
    }
    if (step < 1e-14) break;
  }
  return r;
}

// z-plane partner inside the unit disk for a y-plane root.
CD inside_z_of_y(CD y) {
  CD s = 1.0 - 2.0 * y;
  CD d = std::sqrt(s * s - 1.0);
  CD z1 = s - d;
  CD z2 = s + d;
  return std::abs(z1) <= std::abs(z2) ? z1 : z2;
}

// ---- point complex arithmetic on mpfr pairs -------------------------------

struct PC {
  Real re, im;
  explicit PC(mpfr_prec_t p) : re(p), im(p) {}
};

PC pc_from_cd(CD z, mpfr_prec_t p) {
  PC r(p);
  mpfr_set_d(r.re.get(), z.real(), MPFR_RNDN);
  mpfr_set_d(r.im.get(), z.imag(), MPFR_RNDN);
  return r;
}

PC pc_mul(const PC& a, const PC& b, mpfr_prec_t p) {
  PC r(p);
  Real t1(p), t2(p);
  mpfr_mul(t1.get(), a.re.get(), b.re.get(), MPFR_RNDN);
  mpfr_mul(t2.get(), a.im.get(), b.im.get(), MPFR_RNDN);
  mpfr_sub(r.re.get(), t1.get(), t2.get(), MPFR_RNDN);
  mpfr_mul(t1.get(), a.re.get(), b.im.get(), MPFR_RNDN);
  mpfr_mul(t2.get(), a.im.get(), b.re.get(), MPFR_RNDN);
  mpfr_add(r.im.get(), t1.get(), t2.get(), MPFR_RNDN);
  return r;
}

PC pc_sub(const PC& a, const PC& b, mpfr_prec_t p) {
  PC r(p);
  mpfr_sub(r.re.get(), a.re.get(), b.re.get(), MPFR_RNDN);
  mpfr_sub(r.im.get(), a.im.get(), b.im.get(), MPFR_RNDN);
  return r;
}

PC pc_div(const PC& a, const PC& b, mpfr_prec_t p) {
  PC r(p);
  Real den(p), t1(p), t2(p);
  mpfr_sqr(t1.get(), b.re.get(), MPFR_RNDN);
  mpfr_sqr(t2.get(), b.im.get(), MPFR_RNDN);
  mpfr_add(den.get(), t1.get(), t2.get(), MPFR_RNDN);
  mpfr_mul(t1.get(), a.re.get(), b.re.get(), MPFR_RNDN);
  mpfr_mul(t2.get(), a.im.get(), b.im.get(), MPFR_RNDN);
  mpfr_add(t1.get(), t1.get(), t2.get(), MPFR_RNDN);
  mpfr_div(r.re.get(), t1.get(), den.get(), MPFR_RNDN);
  mpfr_mul(t1.get(), a.im.get(), b.re.get(), MPFR_RNDN);
  mpfr_mul(t2.get(), a.re.get(), b.im.get(), MPFR_RNDN);
  mpfr_sub(t1.get(), t1.get(), t2.get(), MPFR_RNDN);
  mpfr_div(r.im.get(), t1.get(), den.get(), MPFR_RNDN);
  return r;
}

PC pc_horner(const std::vector<Real>& coef, const PC& z, mpfr_prec_t p) {
  PC acc(p);
  mpfr_set_zero(acc.re.get(), 1);
  mpfr_set_zero(acc.im.get(), 1);
  for (std::size_t k = coef.size(); k-- > 0;) {
    acc = pc_mul(acc, z, p);
    mpfr_add(acc.re.get(), acc.re.get(), coef[k].get(), MPFR_RNDN);
  }
  return acc;
}

// Point Newton refinement; a seed with exactly zero imaginary part stays
// real because every product and quotient of exact zeros is an exact zero.
PC newton_polish(const std::vector<Real>& w, const std::vector<Real>& wd,
                 PC z, mpfr_prec_t p, int iters) {
  for (int i = 0; i < iters; ++i) {
    PC num = pc_horner(w, z, p);
    PC den = pc_horner(wd, z, p);
    z = pc_sub(z, pc_div(num, den, p), p);
  }
  return z;
}

// ---- rectangle complex intervals ------------------------------------------

struct CBox {
  Interval re, im;
};

CBox cb_conj(const CBox& a, const PrecisionContext& ctx) {
  return CBox{a.re, iv_neg(a.im, ctx)};
}

CBox cb_sub(const CBox& a, const CBox& b, const PrecisionContext& ctx) {
  return CBox{iv_sub(a.re, b.re, ctx), iv_sub(a.im, b.im, ctx)};
}

CBox cb_mul(const CBox& a, const CBox& b, const PrecisionContext& ctx) {
  Interval re = iv_sub(iv_mul(a.re, b.re, ctx), iv_mul(a.im, b.im, ctx), ctx);
  Interval im = iv_add(iv_mul(a.re, b.im, ctx), iv_mul(a.im, b.re, ctx), ctx);
  return CBox{std::move(re), std::move(im)};
}

CBox cb_div(const CBox& a, const CBox& b, const PrecisionContext& ctx) {
  Interval den = iv_add(iv_sqr(b.re, ctx), iv_sqr(b.im, ctx), ctx);
  if (!den.strictly_positive())
    throw IntervalError("complex interval division by box containing 0");
  Interval re = iv_div(
      iv_add(iv_mul(a.re, b.re, ctx), iv_mul(a.im, b.im, ctx), ctx), den, ctx);
  Interval im = iv_div(
      iv_sub(iv_mul(a.im, b.re, ctx), iv_mul(a.re, b.im, ctx), ctx), den, ctx);
  return CBox{std::move(re), std::move(im)};
}

CBox cb_horner(const PolyI& coef, const CBox& z, const PrecisionContext& ctx) {
  CBox acc{iv_zero(ctx.precision_bits), iv_zero(ctx.precision_bits)};
  for (std::size_t k = coef.size(); k-- > 0;) {
    acc = cb_mul(acc, z, ctx);
    acc.re = iv_add(acc.re, coef[k], ctx);
  }
  return acc;
}

bool strictly_inside(const Interval& inner, const Interval& outer) {
  return mpfr_cmp(inner.lo().get(), outer.lo().get()) > 0 &&
         mpfr_cmp(inner.hi().get(), outer.hi().get()) < 0;
}

Interval symmetrize(const Interval& a, const PrecisionContext& ctx) {
  Interval r{ctx.precision_bits};
  Real m = a.mag_upper();
  mpfr_neg(r.lo().get(), m.get(), MPFR_RNDD);
  mpfr_set(r.hi().get(), m.get(), MPFR_RNDU);
  return r;
}

// Certified rectangle Newton step around a polished point root. For
// force_real the rectangle is kept conjugate symmetric, so the unique
// enclosed root of the real polynomial must itself be real and the
// imaginary part collapses to an exact zero.
std::optional<CBox> certify_root(const PolyI& w, const PolyI& wd,
                                 const PC& center, bool force_real,
                                 mpfr_prec_t p) {
  PrecisionContext ctx{p};
  CBox m{Interval::from_endpoints(center.re, center.re),
         Interval::from_endpoints(center.im, center.im)};
  for (long e = -(p / 2); e <= -16; e += 16) {
    Real rad(p);
    mpfr_set_ui_2exp(rad.get(), 1, e, MPFR_RNDU);
    CBox x{Interval{p}, Interval{p}};
    mpfr_sub(x.re.lo().get(), center.re.get(), rad.get(), MPFR_RNDD);
    mpfr_add(x.re.hi().get(), center.re.get(), rad.get(), MPFR_RNDU);
    if (force_real) {
      mpfr_neg(x.im.lo().get(), rad.get(), MPFR_RNDD);
      mpfr_set(x.im.hi().get(), rad.get(), MPFR_RNDU);
    } else {
      mpfr_sub(x.im.lo().get(), center.im.get(), rad.get(), MPFR_RNDD);
      mpfr_add(x.im.hi().get(), center.im.get(), rad.get(), MPFR_RNDU);
    }
    bool ok = true;
    for (int pass = 0; pass < 3 && ok; ++pass) {
      CBox nx{iv_zero(p), iv_zero(p)};
      try {
        nx = cb_sub(m, cb_div(cb_horner(w, m, ctx), cb_horner(wd, x, ctx), ctx),
                    ctx);
      } catch (const IntervalError&) {
        ok = false;
        break;
      }
      if (force_real) nx.im = symmetrize(nx.im, ctx);
      if (!strictly_inside(nx.re, x.re) || !strictly_inside(nx.im, x.im)) {
        // Later passes only shrink an already certified box, so a failed
        // strict containment there just means the box stopped contracting.
        ok = pass > 0;
        break;
      }
      x = nx;
    }
    if (ok) {
      if (force_real) {
        x.im = iv_zero(p);
      }
      return x;
    }
  }
  return std::nullopt;
}

bool boxes_disjoint(const CBox& a, const CBox& b) {
  bool re_apart = mpfr_cmp(a.re.hi().get(), b.re.lo().get()) < 0 ||
                  mpfr_cmp(b.re.hi().get(), a.re.lo().get()) < 0;
  bool im_apart = mpfr_cmp(a.im.hi().get(), b.im.lo().get()) < 0 ||
                  mpfr_cmp(b.im.hi().get(), a.im.lo().get()) < 0;
  return re_apart || im_apart;
}

// |z|^2 as an interval.
Interval cb_abs2(const CBox& a, const PrecisionContext& ctx) {
  return iv_add(iv_sqr(a.re, ctx), iv_sqr(a.im, ctx), ctx);
}

// One spectral factor: either a real root or the representative of a
// conjugate pair, certified on both sides of the unit circle.
struct RootRep {
  bool is_real = false;
  CD z_in;
  CBox in_box{Interval{2}, Interval{2}};
  CBox out_box{Interval{2}, Interval{2}};
};

// ---- interval polynomial assembly -----------------------------------------

PolyI poly_mul(const PolyI& a, const PolyI& b, const PrecisionContext& ctx) {
  PolyI r;
  r.reserve(a.size() + b.size() - 1);
  for (std::size_t i = 0; i + 1 < a.size() + b.size(); ++i)
    r.push_back(iv_zero(ctx.precision_bits));
  MulScratch scratch(ctx.precision_bits);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      iv_addmul(r[i + j], a[i], b[j], scratch);
  return r;
}

PolyI factor_of(const RootRep& rep, bool outside, const PrecisionContext& ctx) {
  const CBox& r = outside ? rep.out_box : rep.in_box;
  if (rep.is_real) {
    return PolyI{iv_one(ctx.precision_bits), iv_neg(r.re, ctx)};
  }
  // (1 - r z)(1 - conj(r) z) = 1 - 2 Re(r) z + |r|^2 z^2
  return PolyI{iv_one(ctx.precision_bits),
               iv_mul_2si(iv_neg(r.re, ctx), 1, ctx), cb_abs2(r, ctx)};
}

std::vector<Interval> assemble_u(const std::vector<RootRep>& reps,
                                 unsigned long mask, int N,
                                 const PrecisionContext& ictx) {
  PolyI b{iv_one(ictx.precision_bits)};
  for (std::size_t i = 0; i < reps.size(); ++i)
    b = poly_mul(b, factor_of(reps[i], (mask >> i) & 1u, ictx), ictx);

  PolyI binp;
  binp.reserve(N + 1);
  for (int k = 0; k <= N; ++k) {
    mpz_class c = binom_z(N, k);
    binp.push_back(
        iv_mul_2si(Interval::point_z(c.get_mpz_t(), ictx), -N, ictx));
  }
  PolyI numer = poly_mul(binp, b, ictx);

  Interval b1 = iv_zero(ictx.precision_bits);
  for (const Interval& c : b) iv_add_inplace(b1, c);
  if (b1.contains_zero())
    throw IntervalError("filter normalization B(1) interval contains zero");

  std::vector<Interval> u;
  u.reserve(numer.size());
  for (const Interval& c : numer)
    u.push_back(iv_mul_2si(iv_div(c, b1, ictx), 1, ictx));
  return u;
}

// ---- least-asymmetric selection (double precision) -------------------------

std::vector<CD> dpoly_factor(const RootRep& rep, bool outside) {
  CD r = outside ? 1.0 / rep.z_in : rep.z_in;
  if (rep.is_real) return {CD(1.0, 0.0), -r};
  return {CD(1.0, 0.0), CD(-2.0 * r.real(), 0.0), CD(std::norm(r), 0.0)};
}

std::vector<CD> dpoly_mul(const std::vector<CD>& a, const std::vector<CD>& b) {
  std::vector<CD> r(a.size() + b.size() - 1, CD(0.0, 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  return r;
}

// Mean absolute deviation of the unwrapped factor phase from the straight
// line through the origin, over a uniform grid on [0, pi].
double phase_objective(const std::vector<RootRep>& reps, unsigned long mask) {
  std::vector<CD> b{CD(1.0, 0.0)};
  for (std::size_t i = 0; i < reps.size(); ++i)
    b = dpoly_mul(b, dpoly_factor(reps[i], (mask >> i) & 1u));

  constexpr int kGrid = 256;
  std::vector<double> theta(kGrid + 1, 0.0);
  CD prev(0.0, 0.0);
  for (const CD& c : b) prev += c;  // value at omega = 0
  double acc = 0.0;
  for (int t = 1; t <= kGrid; ++t) {
    double w = M_PI * t / kGrid;
    CD z = std::polar(1.0, w);
    CD v(0.0, 0.0);
    for (std::size_t k = b.size(); k-- > 0;) v = v * z + b[k];
    acc += std::arg(v / prev);
    theta[t] = acc;
    prev = v;
  }
  double slope = theta[kGrid] / M_PI;
  double obj = 0.0;
  for (int t = 0; t <= kGrid; ++t) {
    double dev = theta[t] - slope * (M_PI * t / kGrid);
    obj += std::fabs(dev);
  }
  return obj / (kGrid + 1);
}

// ---- full construction ------------------------------------------------------

std::optional<FilterBank> try_build(Family family, int N,
                                    const PrecisionContext& ctx,
                                    mpfr_prec_t prec_int) {
  PrecisionContext ictx{prec_int};
  PolyZ wz = product_zpoly(N);
  PolyZ wdz = derive_z(wz);

  std::vector<Real> wp, wdp;
  PolyI wi, wdi;
  for (const mpz_class& c : wz) {
    Real r(prec_int);
    mpfr_set_z(r.get(), c.get_mpz_t(), MPFR_RNDN);
    wp.push_back(std::move(r));
    wi.push_back(Interval::point_z(c.get_mpz_t(), ictx));
  }
  for (const mpz_class& c : wdz) {
    Real r(prec_int);
    mpfr_set_z(r.get(), c.get_mpz_t(), MPFR_RNDN);
    wdp.push_back(std::move(r));
    wdi.push_back(Interval::point_z(c.get_mpz_t(), ictx));
  }

  // Seeds from the y-plane polynomial P, degree N-1.
  std::vector<RootRep> reps;
  if (N >= 2) {
    std::vector<double> pcoef(N);
    for (int k = 0; k < N; ++k)
      pcoef[k] = binom_z(N - 1 + k, k).get_d();
    std::vector<CD> yroots = roots_durand_kerner(pcoef);
    std::vector<CD> chosen;
    for (const CD& y : yroots) {
      double tol = 1e-7 * (1.0 + std::abs(y));
      if (std::abs(y.imag()) <= tol)
        chosen.push_back(CD(y.real(), 0.0));
      else if (y.imag() > 0.0)
        chosen.push_back(y);
    }
    std::sort(chosen.begin(), chosen.end(), [](CD a, CD b) {
      if (a.real() != b.real()) return a.real() < b.real();
      return a.imag() < b.imag();
    });
    int counted = 0;
    for (const CD& y : chosen) counted += (y.imag() == 0.0) ? 1 : 2;
    if (counted != N - 1) return std::nullopt;

    int newton_iters =
        8 + static_cast<int>(std::ceil(std::log2(double(prec_int) / 32.0)));
    for (const CD& y : chosen) {
      RootRep rep;
      rep.is_real = (y.imag() == 0.0);
      CD zin = inside_z_of_y(y);
      if (zin.imag() < 0.0) zin = std::conj(zin);
      if (rep.is_real) zin = CD(zin.real(), 0.0);
      rep.z_in = zin;
      // conj(1/z) keeps the outside representative in the upper half plane
      CD zout = std::conj(1.0 / zin);
      PC pin = newton_polish(wp, wdp, pc_from_cd(zin, prec_int), prec_int,
                             newton_iters);
      PC pout = newton_polish(wp, wdp, pc_from_cd(zout, prec_int), prec_int,
                              newton_iters);
      auto bin = certify_root(wi, wdi, pin, rep.is_real, prec_int);
      auto bout = certify_root(wi, wdi, pout, rep.is_real, prec_int);
      if (!bin || !bout) return std::nullopt;
      rep.in_box = *bin;
      rep.out_box = *bout;
      Interval ain = cb_abs2(rep.in_box, ictx);
      Interval aout = cb_abs2(rep.out_box, ictx);
      if (!(mpfr_cmp_ui(ain.hi().get(), 1) < 0)) return std::nullopt;
      if (!(mpfr_cmp_ui(aout.lo().get(), 1) > 0)) return std::nullopt;
      if (!rep.is_real && !rep.in_box.im.strictly_positive())
        return std::nullopt;
      if (!rep.is_real && !rep.out_box.im.strictly_positive())
        return std::nullopt;
      reps.push_back(std::move(rep));
    }

    // All 2N-2 certified boxes must be pairwise disjoint: this proves the
    // boxes pin distinct simple roots, i.e. the full factorization.
    std::vector<CBox> all;
    for (const RootRep& rep : reps) {
      all.push_back(rep.in_box);
      all.push_back(rep.out_box);
      if (!rep.is_real) {
        all.push_back(cb_conj(rep.in_box, ictx));
        all.push_back(cb_conj(rep.out_box, ictx));
      }
    }
    for (std::size_t i = 0; i < all.size(); ++i)
      for (std::size_t j = i + 1; j < all.size(); ++j)
        if (!boxes_disjoint(all[i], all[j])) return std::nullopt;
  }

  unsigned long mask = 0;
  if (family == Family::symlet) {
    if (reps.size() > 22)
      throw std::invalid_argument("symlet flip search too large");
    unsigned long count = 1ul << reps.size();
    double best = 0.0;
    bool have = false;
    for (unsigned long m = 0; m < count; ++m) {
      double obj = phase_objective(reps, m);
      if (!have || obj < best - 1e-9 * (1.0 + std::fabs(best))) {
        best = obj;
        mask = m;
        have = true;
      }
    }
  }

  std::vector<Interval> u_raw = assemble_u(reps, mask, N, ictx);

  FilterBank bank;
  bank.family = family;
  bank.N = N;
  bank.K = N;
  bank.precision_bits = ctx.precision_bits;
  bank.u0.reserve(u_raw.size());
  for (const Interval& c : u_raw) bank.u0.push_back(iv_round_to(c, ctx));

  if (family == Family::symlet) {
    // Fix the orientation: put the dominant coefficient in the right half,
    // matching the customary least-asymmetric tables. The reflected bank
    // corresponds to the complementary root selection.
    int arg = 0;
    double best = -1.0;
    for (std::size_t k = 0; k < bank.u0.size(); ++k) {
      double m = std::fabs(bank.u0[k].mid_double());
      if (m > best) {
        best = m;
        arg = static_cast<int>(k);
      }
    }
    if (arg < bank.K) std::reverse(bank.u0.begin(), bank.u0.end());
  }

  Real thr(ctx.precision_bits);
  mpfr_set_ui_2exp(thr.get(), 1, 8 - ctx.precision_bits, MPFR_RNDN);
  for (const Interval& c : bank.u0) {
    Real wdt = c.width_upper();
    if (mpfr_cmp(wdt.get(), thr.get()) > 0) return std::nullopt;
  }

  for (int par = 0; par < 2; ++par)
    if (!parity_sum(bank, par, ctx).contains_si(1))
      throw IntervalError("constructed filter violates parity normalization");
  for (int i = 0; i < N; ++i)
    if (!moment_sum(bank, i, ctx).contains_si(0))
      throw IntervalError("constructed filter violates moment condition");
  return bank;
}

FilterBank build_family(Family family, int N, const PrecisionContext& ctx) {
  if (ctx.precision_bits < 64)
    throw std::invalid_argument("precision_bits must be at least 64");
  mpfr_prec_t prec_int = ctx.precision_bits + 64 + 8 * mpfr_prec_t(N);
  for (int attempt = 0; attempt < 4; ++attempt) {
    std::optional<FilterBank> bank = try_build(family, N, ctx, prec_int);
    if (bank) return std::move(*bank);
    prec_int *= 2;
  }
  throw IntervalError("could not certify filter roots for N=" +
                      std::to_string(N));
}

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::daubechies:
      return "daubechies";
    case Family::symlet:
      return "symlet";
    default:
      return "custom";
  }
}

Family family_from_name(const std::string& name) {
  if (name == "daubechies" || name == "db") return Family::daubechies;
  if (name == "symlet" || name == "sym") return Family::symlet;
  if (name == "custom") return Family::custom;
  throw std::invalid_argument("unknown filter family: " + name);
}

FilterBank daubechies_filter(int N, const PrecisionContext& ctx) {
  if (N < 1 || N > 32)
    throw std::invalid_argument("daubechies_filter: N must be in [1, 32]");
  return build_family(Family::daubechies, N, ctx);
}

FilterBank symlet_filter(int N, const PrecisionContext& ctx) {
  if (N < 4 || N > 32)
    throw std::invalid_argument("symlet_filter: N must be in [4, 32]");
  return build_family(Family::symlet, N, ctx);
}

Interval parity_sum(const FilterBank& bank, int parity,
                    const PrecisionContext& ctx) {
  Interval s = iv_zero(ctx.precision_bits);
  for (std::size_t k = static_cast<std::size_t>(parity); k < bank.u0.size();
       k += 2)
    iv_add_inplace(s, bank.u0[k]);
  return s;
}

Interval moment_sum(const FilterBank& bank, int order,
                    const PrecisionContext& ctx) {
  Interval s = iv_zero(ctx.precision_bits);
  MulScratch scratch(ctx.precision_bits);
  for (std::size_t k = 0; k < bank.u0.size(); ++k) {
    mpz_class kp;
    mpz_ui_pow_ui(kp.get_mpz_t(), k, static_cast<unsigned long>(order));
    if (k & 1) kp = -kp;
    Interval w = Interval::point_z(kp.get_mpz_t(), ctx);
    iv_addmul(s, w, bank.u0[k], scratch);
  }
  return s;
}

int count_vanishing_moments(const FilterBank& bank,
                            const PrecisionContext& ctx) {
  int n = 0;
  while (n < bank.K && moment_sum(bank, n, ctx).contains_si(0)) ++n;
  return n;
}

FilterBank load_filter(const std::string& path, const PrecisionContext& ctx) {
  std::ifstream in(path);
  if (!in) throw FilterError("cannot open coefficient file: " + path);

  Family fam = Family::custom;
  std::vector<Interval> coeffs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string::size_type hash = line.find('#');
    if (hash != std::string::npos) {
      std::string comment = line.substr(hash + 1);
      std::string::size_type fpos = comment.find("family=");
      if (fpos != std::string::npos) {
        std::istringstream fs(comment.substr(fpos + 7));
        std::string name;
        fs >> name;
        try {
          fam = family_from_name(name);
        } catch (const std::invalid_argument&) {
          fam = Family::custom;
        }
      }
      line.erase(hash);
    }
    std::istringstream ls(line);
    std::string vtok, rtok, extra;
    if (!(ls >> vtok)) continue;  // blank line
    if (!(ls >> rtok) || (ls >> extra))
      throw FilterError("line " + std::to_string(lineno) +
                        ": expected `value radius`");
    Interval v{ctx.precision_bits}, r{ctx.precision_bits};
    try {
      v = Interval::from_strings(vtok, vtok, ctx);
      r = Interval::from_strings(rtok, rtok, ctx);
    } catch (const IntervalError& e) {
      throw FilterError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (mpfr_sgn(r.lo().get()) < 0)
      throw FilterError("line " + std::to_string(lineno) +
                        ": radius must be nonnegative");
    Interval c{ctx.precision_bits};
    mpfr_sub(c.lo().get(), v.lo().get(), r.hi().get(), MPFR_RNDD);
    mpfr_add(c.hi().get(), v.hi().get(), r.hi().get(), MPFR_RNDU);
    coeffs.push_back(std::move(c));
  }
  if (coeffs.empty() || coeffs.size() % 2 != 0)
    throw FilterError("coefficient count must be a positive even number, got " +
                      std::to_string(coeffs.size()));

  FilterBank bank;
  bank.family = fam;
  bank.K = static_cast<int>(coeffs.size() / 2);
  bank.u0 = std::move(coeffs);
  bank.precision_bits = ctx.precision_bits;

  for (int par = 0; par < 2; ++par) {
    Interval s = parity_sum(bank, par, ctx);
    if (!s.contains_si(1)) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "[%.17g, %.17g]", s.lo_double(),
                    s.hi_double());
      throw FilterError(std::string(par ? "odd" : "even") +
                        "-index coefficient sum " + buf +
                        " does not contain 1");
    }
  }
  bank.N = count_vanishing_moments(bank, ctx);
  return bank;
}

std::string serialize_filter(const FilterBank& bank) {
  std::ostringstream out;
  out << "# family=" << family_name(bank.family) << " N=" << bank.N
      << " K=" << bank.K << " precision_bits=" << bank.precision_bits << "\n";
  PrecisionContext ctx{bank.precision_bits};
  int digits = static_cast<int>(double(bank.precision_bits) * 0.30103) + 3;
  for (const Interval& c : bank.u0) {
    Real mid(bank.precision_bits);
    mpfr_add(mid.get(), c.lo().get(), c.hi().get(), MPFR_RNDN);
    mpfr_div_2si(mid.get(), mid.get(), 1, MPFR_RNDN);
    char* vs = nullptr;
    mpfr_asprintf(&vs, "%.*RNe", digits, mid.get());
    std::string vstr(vs);
    mpfr_free_str(vs);

    // Radius covering both the enclosure width and the decimal rounding of
    // the printed midpoint; printing it upward keeps the cover valid.
    Interval back = Interval::from_strings(vstr, vstr, ctx);
    Real r1(bank.precision_bits), r2(bank.precision_bits);
    mpfr_sub(r1.get(), c.hi().get(), back.lo().get(), MPFR_RNDU);
    mpfr_sub(r2.get(), back.hi().get(), c.lo().get(), MPFR_RNDU);
    real_max_up(r1, r2);
    if (mpfr_sgn(r1.get()) < 0) mpfr_set_zero(r1.get(), 1);
    char* rs = nullptr;
    mpfr_asprintf(&rs, "%.5RUe", r1.get());
    out << vstr << " " << rs << "\n";
    mpfr_free_str(rs);
  }
  return out.str();
}

}  // namespace sbr
