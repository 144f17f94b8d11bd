#include "sbr/verify.hpp"

#include <gmpxx.h>
#include <mpfr.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>

namespace sbr {

namespace {

mpz_class pow2_z(long e) {
  mpz_class r;
  mpz_setbit(r.get_mpz_t(), static_cast<mp_bitcnt_t>(e));
  return r;
}

Interval iv_zero(mpfr_prec_t prec) {
  Interval r(prec);
  mpfr_set_zero(r.lo().get(), 1);
  mpfr_set_zero(r.hi().get(), 1);
  return r;
}

Interval iv_entire(mpfr_prec_t prec) {
  Interval r(prec);
  mpfr_set_inf(r.lo().get(), -1);
  mpfr_set_inf(r.hi().get(), 1);
  return r;
}

Interval iv_nonneg(mpfr_prec_t prec) {
  Interval r(prec);
  mpfr_set_zero(r.lo().get(), 1);
  mpfr_set_inf(r.hi().get(), 1);
  return r;
}

void set_zero(Interval& v) {
  mpfr_set_zero(v.lo().get(), 1);
  mpfr_set_zero(v.hi().get(), 1);
}

// out = a^2 without allocating, lower endpoint clipped at 0 when a straddles.
void sqr_into(Interval& out, const Interval& a) {
  if (mpfr_sgn(a.lo().get()) >= 0) {
    mpfr_sqr(out.lo().get(), a.lo().get(), MPFR_RNDD);
    mpfr_sqr(out.hi().get(), a.hi().get(), MPFR_RNDU);
  } else if (mpfr_sgn(a.hi().get()) <= 0) {
    mpfr_sqr(out.lo().get(), a.hi().get(), MPFR_RNDD);
    mpfr_sqr(out.hi().get(), a.lo().get(), MPFR_RNDU);
  } else {
    mpfr_set_zero(out.lo().get(), 1);
    if (mpfr_cmpabs(a.lo().get(), a.hi().get()) >= 0)
      mpfr_sqr(out.hi().get(), a.lo().get(), MPFR_RNDU);
    else
      mpfr_sqr(out.hi().get(), a.hi().get(), MPFR_RNDU);
  }
}

// cell widened by the certified sup-norm error of its enclosure
void pad_into(Interval& out, const Interval& cell, const Interval& eps) {
  mpfr_sub(out.lo().get(), cell.lo().get(), eps.hi().get(), MPFR_RNDD);
  mpfr_add(out.hi().get(), cell.hi().get(), eps.hi().get(), MPFR_RNDU);
}

// Arc offset holding residue r, or a throw when the enclosure does not
// retain that residue class.
long locate_offset(const FunctionEnclosure& phi, const mpz_class& r) {
  mpz_class o = r - phi.lo;
  mpz_class mod = pow2_z(phi.j);
  mpz_fdiv_r(o.get_mpz_t(), o.get_mpz_t(), mod.get_mpz_t());
  if (o > phi.hi - phi.lo)
    throw IntervalError("missing coverage of a required shift");
  return o.get_si();
}

std::vector<long> candidate_offsets(const SigmaEnclosure& se) {
  const long n = se.count();
  if (n == 0) throw std::invalid_argument("sigma enclosure has no cells");
  const mpfr_prec_t prec = mpfr_get_prec(se.s0.front().lo().get());
  Real best(prec);
  mpfr_set_inf(best.get(), -1);
  for (long o = 0; o < n; ++o)
    mpfr_max(best.get(), best.get(), se.s0[static_cast<size_t>(o)].lo().get(),
             MPFR_RNDN);
  std::vector<long> out;
  for (long o = 0; o < n; ++o) {
    const auto idx = static_cast<size_t>(o);
    if (mpfr_cmp(se.s0[idx].hi().get(), best.get()) < 0) continue;
    if (!se.s1[idx].contains_zero()) continue;
    out.push_back(o);
  }
  return out;
}

TorusWindow window_from_offsets(const SigmaEnclosure& se,
                                const std::vector<long>& cand) {
  if (cand.empty())
    throw std::logic_error("variance maximiser candidate set is empty");
  const long j = se.j;
  const mpz_class mod = pow2_z(j);
  if (!se.window.full_flag) {
    // Offsets live on one coordinate line; shift the hull back into [0, 2^j)
    // so nesting against the parent window is preserved.
    mpz_class a = se.window.a + cand.front();
    mpz_class b = se.window.a + cand.back();
    mpz_class q;
    mpz_fdiv_q(q.get_mpz_t(), a.get_mpz_t(), mod.get_mpz_t());
    a -= q * mod;
    b -= q * mod;
    return TorusWindow::arc(j, a, b);
  }
  std::vector<mpz_class> res;
  res.reserve(cand.size());
  for (long o : cand) {
    mpz_class r = se.window.a + o;
    mpz_fdiv_r(r.get_mpz_t(), r.get_mpz_t(), mod.get_mpz_t());
    res.push_back(r);
  }
  std::sort(res.begin(), res.end());
  res.erase(std::unique(res.begin(), res.end()), res.end());
  if (mpz_class(static_cast<long>(res.size())) >= mod)
    return TorusWindow::full(j);
  // Complement of the largest cyclic gap is the smallest covering arc.
  mpz_class best_gap = res.front() + mod - res.back() - 1;
  mpz_class best_a = res.front();
  mpz_class best_b = res.back();
  for (size_t i = 0; i + 1 < res.size(); ++i) {
    mpz_class gap = res[i + 1] - res[i] - 1;
    if (gap > best_gap) {
      best_gap = gap;
      best_a = res[i + 1];
      best_b = res[i] + mod;
    }
  }
  return TorusWindow::arc(j, best_a, best_b);
}

SigmaEnclosure restrict_se(const SigmaEnclosure& se, const TorusWindow& sub) {
  SigmaEnclosure out;
  out.j = se.j;
  out.window = sub;
  const mpz_class mod = pow2_z(se.j);
  mpz_class cells = sub.cell_count();
  if (!cells.fits_slong_p())
    throw std::invalid_argument("window too large to restrict");
  const long cnt = cells.get_si();
  out.s0.reserve(static_cast<size_t>(cnt));
  out.s1.reserve(static_cast<size_t>(cnt));
  out.s2.reserve(static_cast<size_t>(cnt));
  for (long c = 0; c < cnt; ++c) {
    mpz_class o = sub.a + c - se.window.a;
    mpz_fdiv_r(o.get_mpz_t(), o.get_mpz_t(), mod.get_mpz_t());
    if (o >= se.count())
      throw std::logic_error("restriction window leaves the sigma enclosure");
    const auto idx = static_cast<size_t>(o.get_si());
    out.s0.push_back(se.s0[idx]);
    out.s1.push_back(se.s1[idx]);
    out.s2.push_back(se.s2[idx]);
  }
  return out;
}

Interval hull_of(const std::vector<Interval>& v, const PrecisionContext& ctx) {
  Interval h = v.front();
  for (size_t i = 1; i < v.size(); ++i) h = iv_hull(h, v[i], ctx);
  return h;
}

}  // namespace

SigmaEnclosure sigma_enclosure(const FunctionEnclosure& phi0,
                               const FunctionEnclosure& phi1,
                               const FunctionEnclosure& phi2,
                               const TorusWindow& window,
                               const PrecisionContext& ctx) {
  if (phi0.n != 0 || phi1.n != 1 || phi2.n != 2)
    throw std::invalid_argument("sigma enclosure needs derivative orders 0..2");
  if (phi0.j != window.level || phi1.j != window.level ||
      phi2.j != window.level)
    throw std::invalid_argument("enclosure level does not match the window");
  if (phi0.K != phi1.K || phi0.K != phi2.K)
    throw std::invalid_argument("enclosures disagree on filter support");
  mpz_class cells = window.cell_count();
  if (!cells.fits_slong_p())
    throw std::invalid_argument("window too large for cellwise bounds");
  const long cnt = cells.get_si();
  const mpfr_prec_t prec = ctx.precision_bits;
  const int B = phi0.branches();
  const bool fin0 = phi0.eps.is_finite();
  const bool fin1 = fin0 && phi1.eps.is_finite();
  const bool fin2 = fin1 && phi2.eps.is_finite();

  SigmaEnclosure se;
  se.j = window.level;
  se.window = window;
  se.s0.reserve(static_cast<size_t>(cnt));
  se.s1.reserve(static_cast<size_t>(cnt));
  se.s2.reserve(static_cast<size_t>(cnt));

  MulScratch scratch(prec);
  Interval p0(prec), p1(prec), p2(prec), t(prec);
  Interval a0(prec), a1(prec), a2(prec);
  for (long c = 0; c < cnt; ++c) {
    const mpz_class r = window.a + c;
    const long o0 = locate_offset(phi0, r);
    const long o1 = locate_offset(phi1, r);
    const long o2 = locate_offset(phi2, r);
    set_zero(a0);
    set_zero(a1);
    set_zero(a2);
    if (fin0) {
      for (int m = 0; m < B; ++m) {
        pad_into(p0, phi0.cell_at(o0, m), phi0.eps);
        sqr_into(t, p0);
        iv_add_inplace(a0, t);
        if (!fin1) continue;
        pad_into(p1, phi1.cell_at(o1, m), phi1.eps);
        iv_addmul(a1, p1, p0, scratch);
        if (!fin2) continue;
        pad_into(p2, phi2.cell_at(o2, m), phi2.eps);
        iv_addmul(a2, p2, p0, scratch);
        sqr_into(t, p1);
        iv_add_inplace(a2, t);
      }
    }
    se.s0.push_back(fin0 ? a0 : iv_nonneg(prec));
    se.s1.push_back(fin1 ? iv_mul_2si(a1, 1, ctx) : iv_entire(prec));
    se.s2.push_back(fin2 ? iv_mul_2si(a2, 1, ctx) : iv_entire(prec));
  }
  return se;
}

TorusWindow candidate_interval(const SigmaEnclosure& se) {
  return window_from_offsets(se, candidate_offsets(se));
}

Interval upsilon_enclosure(const SigmaEnclosure& se,
                           const FunctionEnclosure& phi1,
                           const Interval& sigma_bar_sq,
                           const PrecisionContext& ctx) {
  if (se.count() == 0)
    throw std::invalid_argument("sigma enclosure has no cells");
  if (phi1.n != 1 || phi1.j != se.j)
    throw std::invalid_argument("phi1 does not match the sigma enclosure");
  if (!sigma_bar_sq.strictly_positive())
    throw std::invalid_argument("variance maximum must be strictly positive");
  const mpfr_prec_t prec = ctx.precision_bits;
  Interval den = hull_of(se.s2, ctx);
  if (mpfr_sgn(den.hi().get()) >= 0)
    throw IntervalError("denominator not certified negative");

  Interval num(prec);
  if (phi1.eps.is_finite()) {
    const int B = phi1.branches();
    Interval p1(prec), t(prec), acc(prec);
    bool first = true;
    for (long c = 0; c < se.count(); ++c) {
      const long o1 = locate_offset(phi1, se.window.a + c);
      set_zero(acc);
      for (int m = 0; m < B; ++m) {
        pad_into(p1, phi1.cell_at(o1, m), phi1.eps);
        sqr_into(t, p1);
        iv_add_inplace(acc, t);
      }
      num = first ? acc : iv_hull(num, acc, ctx);
      first = false;
    }
  } else {
    num = iv_nonneg(prec);
  }
  return iv_neg(iv_mul_2si(iv_div(num, den, ctx), 1, ctx), ctx);
}

Interval torus_mean_sigma(const FunctionEnclosure& phi0,
                          const PrecisionContext& ctx) {
  if (phi0.n != 0)
    throw std::invalid_argument("orthonormality mean needs the order-0 cells");
  if (!phi0.window.full_flag)
    throw std::invalid_argument("full-torus enclosure required");
  const mpz_class mod = pow2_z(phi0.j);
  if (!mod.fits_slong_p())
    throw std::invalid_argument("level too deep for a cellwise mean");
  const long cnt = mod.get_si();
  const int B = phi0.branches();
  Interval acc = iv_zero(ctx.precision_bits);
  Interval t(ctx.precision_bits);
  for (long r = 0; r < cnt; ++r) {
    const long o = locate_offset(phi0, mpz_class(r));
    for (int m = 0; m < B; ++m) {
      sqr_into(t, phi0.cell_at(o, m));
      iv_add_inplace(acc, t);
    }
  }
  return iv_mul_2si(acc, -phi0.j, ctx);
}

namespace {

FilterBank make_bank(Family family, int N, const PrecisionContext& ctx) {
  switch (family) {
    case Family::daubechies:
      return daubechies_filter(N, ctx);
    case Family::symlet:
      return symlet_filter(N, ctx);
    default:
      throw std::invalid_argument("custom banks must be passed explicitly");
  }
}

TorusWindow evolve(const TorusWindow& w) {
  if (w.full_flag) return TorusWindow::full(w.level + 1);
  return TorusWindow::arc(w.level + 1, 2 * w.a, 2 * w.b + 1);
}

double window_width(const TorusWindow& w) {
  return w.cell_count().get_d() * std::ldexp(1.0, static_cast<int>(-w.level));
}

// Rounding noise in the retained cells exceeding the analytic error bound
// means deeper levels cannot tighten the result; only more precision can.
bool rounding_dominates(const FunctionEnclosure& e, const SigmaEnclosure& se,
                        const std::vector<long>& cand) {
  if (!e.eps.is_finite()) return false;
  const mpfr_prec_t prec = mpfr_get_prec(e.eps.hi().get());
  Real w(prec), wmax(prec);
  mpfr_set_zero(wmax.get(), 1);
  for (long o : cand) {
    const long eo = locate_offset(e, se.window.a + o);
    for (int m = 0; m < e.branches(); ++m) {
      const Interval& c = e.cell_at(eo, m);
      mpfr_sub(w.get(), c.hi().get(), c.lo().get(), MPFR_RNDU);
      mpfr_max(wmax.get(), wmax.get(), w.get(), MPFR_RNDU);
    }
  }
  return mpfr_cmp(wmax.get(), e.eps.hi().get()) > 0;
}

VerificationReport run_verification(const FilterBank& bank0,
                                    double target_width, long max_level,
                                    const PrecisionContext& ctx) {
  if (!(target_width > 0))
    throw std::invalid_argument("target width must be positive");
  if (max_level < 1)
    throw std::invalid_argument("max level must be at least 1");
  constexpr mpfr_prec_t kPrecisionCap = 16384;

  VerificationReport rep;
  rep.family = bank0.family;
  rep.N = bank0.N;
  rep.precision_bits = ctx.precision_bits;
  rep.I_final = TorusWindow::full(0);
  rep.t0_enclosure = rep.I_final;
  rep.sigma_bar_sq = iv_nonneg(ctx.precision_bits);
  rep.upsilon = iv_entire(ctx.precision_bits);
  rep.second_deriv_upper = iv_entire(ctx.precision_bits);

  PrecisionContext cur = ctx;
  std::unique_ptr<CascadeLadder> ladder;
  try {
    ladder = std::make_unique<CascadeLadder>(bank0, 3, cur);
  } catch (const std::invalid_argument& e) {
    rep.note = e.what();
    return rep;
  }

  Interval sb = iv_nonneg(cur.precision_bits);
  Interval ups = iv_entire(cur.precision_bits);
  TorusWindow I = TorusWindow::full(0);
  std::vector<TorusWindow> history;

  for (long j = 1; j <= max_level; ++j) {
    const TorusWindow next = evolve(I);
    try {
      ladder->step(next);
    } catch (const IntervalError& e) {
      rep.note = e.what();
      break;
    }
    history.push_back(next);
    rep.j_final = ladder->level();

    FunctionEnclosure e0 = ladder->enclosure(0, true);
    if (!e0.eps.is_finite()) {
      // No sup-norm certificate yet: every cell stays a candidate.
      I = ladder->window();
      rep.I_final = I;
      rep.t0_enclosure = I;
      rep.sigma_width_trace.push_back(sb.width_double());
      rep.window_width_trace.push_back(window_width(I));
      continue;
    }
    FunctionEnclosure e1 = ladder->enclosure(1, true);
    FunctionEnclosure e2 = ladder->enclosure(2, true);
    SigmaEnclosure se = sigma_enclosure(e0, e1, e2, ladder->window(), cur);
    std::vector<long> cand = candidate_offsets(se);
    TorusWindow Inew = window_from_offsets(se, cand);

    Interval sb_j(cur.precision_bits);
    mpfr_set_inf(sb_j.lo().get(), -1);
    mpfr_set_inf(sb_j.hi().get(), -1);
    for (long o = 0; o < se.count(); ++o)
      mpfr_max(sb_j.lo().get(), sb_j.lo().get(),
               se.s0[static_cast<size_t>(o)].lo().get(), MPFR_RNDN);
    for (long o : cand)
      mpfr_max(sb_j.hi().get(), sb_j.hi().get(),
               se.s0[static_cast<size_t>(o)].hi().get(), MPFR_RNDN);
    sb = iv_intersect(sb, sb_j, cur);

    SigmaEnclosure seI = restrict_se(se, Inew);
    Interval den = hull_of(seI.s2, cur);
    rep.second_deriv_upper = den;
    if (mpfr_sgn(den.hi().get()) < 0 && sb.strictly_positive())
      ups = iv_intersect(ups, upsilon_enclosure(seI, e1, sb, cur), cur);

    I = Inew;
    rep.I_final = I;
    rep.t0_enclosure = I;
    rep.sigma_bar_sq = sb;
    rep.upsilon = ups;
    rep.sigma_width_trace.push_back(sb.width_double());
    rep.window_width_trace.push_back(window_width(I));

    const bool sb_ok = sb.is_finite() && sb.width_double() <= target_width;
    const bool up_ok = ups.is_finite() && ups.width_double() <= target_width;
    if (sb_ok && up_ok) {
      rep.verified = mpfr_sgn(rep.second_deriv_upper.hi().get()) < 0 &&
                     ups.strictly_positive() && sb.strictly_positive();
      if (!rep.verified)
        rep.note = "enclosures converged without a negativity certificate";
      return rep;
    }

    const bool stuck = (!sb_ok && rounding_dominates(e0, se, cand)) ||
                       (sb_ok && rounding_dominates(e2, se, cand));
    if (stuck) {
      if (2 * cur.precision_bits > kPrecisionCap) {
        rep.note = "precision cap reached";
        break;
      }
      cur.precision_bits *= 2;
      rep.precision_bits = cur.precision_bits;
      ladder = std::make_unique<CascadeLadder>(bank0, 3, cur);
      for (const TorusWindow& w : history) ladder->step(w);
    }
  }
  if (rep.note.empty())
    rep.note = "max level reached before both widths met the target";
  return rep;
}

}  // namespace

VerificationReport verify_assumption(Family family, int N, double target_width,
                                     long max_level,
                                     const PrecisionContext& ctx) {
  VerificationReport rep;
  rep.family = family;
  rep.N = N;
  rep.precision_bits = ctx.precision_bits;
  rep.I_final = TorusWindow::full(0);
  rep.t0_enclosure = rep.I_final;
  rep.sigma_bar_sq = iv_nonneg(ctx.precision_bits);
  rep.upsilon = iv_entire(ctx.precision_bits);
  rep.second_deriv_upper = iv_entire(ctx.precision_bits);
  std::unique_ptr<FilterBank> bank;
  try {
    bank = std::make_unique<FilterBank>(make_bank(family, N, ctx));
  } catch (const std::invalid_argument& e) {
    rep.note = e.what();
    return rep;
  }
  return run_verification(*bank, target_width, max_level, ctx);
}

VerificationReport verify_assumption(const FilterBank& bank,
                                     double target_width, long max_level,
                                     const PrecisionContext& ctx) {
  return run_verification(bank, target_width, max_level, ctx);
}

}  // namespace sbr
