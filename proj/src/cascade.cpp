#include "sbr/cascade.hpp"

#include <algorithm>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace sbr {

namespace {

constexpr std::size_t kDefaultMaxEntries = 6'000'000;

mpz_class pow2_z(long e) {
  mpz_class p = 0;
  mpz_setbit(p.get_mpz_t(), static_cast<mp_bitcnt_t>(e));
  return p;
}

mpz_class fdiv_2exp(const mpz_class& x, long e) {
  mpz_class q;
  mpz_fdiv_q_2exp(q.get_mpz_t(), x.get_mpz_t(), static_cast<mp_bitcnt_t>(e));
  return q;
}

long binom_l(int n, int k) {
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

Interval iv_zero(const PrecisionContext& ctx) {
  return Interval::point_si(0, ctx);
}

Interval iv_entire(const PrecisionContext& ctx) {
  Interval r(ctx.precision_bits);
  mpfr_set_inf(r.lo().get(), -1);
  mpfr_set_inf(r.hi().get(), 1);
  return r;
}

Interval iv_pos_inf(const PrecisionContext& ctx) {
  Interval r(ctx.precision_bits);
  mpfr_set_inf(r.lo().get(), 1);
  mpfr_set_inf(r.hi().get(), 1);
  return r;
}

Interval round_to(const Interval& a, const PrecisionContext& ctx) {
  Interval r(ctx.precision_bits);
  mpfr_set(r.lo().get(), a.lo().get(), MPFR_RNDD);
  mpfr_set(r.hi().get(), a.hi().get(), MPFR_RNDU);
  return r;
}

void set_zero(Interval& x) {
  mpfr_set_zero(x.lo().get(), 1);
  mpfr_set_zero(x.hi().get(), 1);
}

void abs_into(Interval& dst, const Interval& src) {
  int sl = mpfr_sgn(src.lo().get());
  int sh = mpfr_sgn(src.hi().get());
  if (sl >= 0) {
    mpfr_set(dst.lo().get(), src.lo().get(), MPFR_RNDD);
    mpfr_set(dst.hi().get(), src.hi().get(), MPFR_RNDU);
  } else if (sh <= 0) {
    mpfr_neg(dst.lo().get(), src.hi().get(), MPFR_RNDD);
    mpfr_neg(dst.hi().get(), src.lo().get(), MPFR_RNDU);
  } else {
    mpfr_set_zero(dst.lo().get(), 1);
    mpfr_neg(dst.hi().get(), src.lo().get(), MPFR_RNDU);
    mpfr_max(dst.hi().get(), dst.hi().get(), src.hi().get(), MPFR_RNDU);
  }
}

void max_into(Interval& acc, const Interval& b) {
  mpfr_max(acc.lo().get(), acc.lo().get(), b.lo().get(), MPFR_RNDD);
  mpfr_max(acc.hi().get(), acc.hi().get(), b.hi().get(), MPFR_RNDU);
}

// offset and branch of absolute index k within an arc; false when the
// residue class (or the index range) is not covered
bool arc_locate(const mpz_class& lo, const mpz_class& hi, long level, int B,
                const mpz_class& k, long* offset, int* branch) {
  if (k < 0) return false;
  mpz_class rho, m, o;
  mpz_fdiv_r_2exp(rho.get_mpz_t(), k.get_mpz_t(), static_cast<mp_bitcnt_t>(level));
  m = k - rho;
  mpz_fdiv_q_2exp(m.get_mpz_t(), m.get_mpz_t(), static_cast<mp_bitcnt_t>(level));
  if (m >= B) return false;
  o = rho - lo;
  mpz_fdiv_r_2exp(o.get_mpz_t(), o.get_mpz_t(), static_cast<mp_bitcnt_t>(level));
  if (o > hi - lo) return false;
  *offset = o.get_si();
  *branch = static_cast<int>(m.get_si());
  return true;
}

LevelData make_level0(int K, const TorusWindow& w0, const PrecisionContext& ctx) {
  if (w0.level != 0) throw std::invalid_argument("cascade must start at level 0");
  LevelData d;
  d.level = 0;
  d.K = K;
  d.lo = w0.a - (2 * K - 2);
  d.hi = w0.b;
  long n = mpz_class(d.hi - d.lo + 1).get_si();
  const int B = 2 * K - 1;
  d.g.assign(static_cast<std::size_t>(n) * B, iv_zero(ctx));
  Interval one = Interval::point_si(1, ctx);
  for (long o = 0; o < n; ++o) d.at(o, 0) = one;
  return d;
}

LevelData advance(const DerivedFilter& u, const LevelData& prev,
                  const TorusWindow& next, const PrecisionContext& ctx,
                  std::size_t max_entries) {
  const int K = prev.K;
  const int B = 2 * K - 1;
  if (next.level != prev.level + 1)
    throw std::invalid_argument("cascade level must advance by one");
  LevelData out;
  out.level = next.level;
  out.K = K;
  out.lo = next.a - (2 * K - 2);
  out.hi = next.b;

  mpz_class cnt = out.hi - out.lo + 1;
  if (!cnt.fits_slong_p() ||
      static_cast<std::size_t>(cnt.get_si()) >
          max_entries / static_cast<std::size_t>(B))
    throw IntervalError("window too large for memory budget");
  const long n = cnt.get_si();
  out.g.assign(static_cast<std::size_t>(n) * B, iv_zero(ctx));

  // A tap needs cell q of the previous level; any stored representative of
  // q's residue class serves (duplicates are identical), so coverage is a
  // residue condition. The branch shift keeps the raw q: the fetched value
  // is g at absolute index q + 2^prev.level (m - w) either way.
  const mpz_class prev_span = prev.hi - prev.lo;
  MulScratch scratch(ctx.precision_bits);
  std::vector<long> tap_off(static_cast<std::size_t>(K));
  std::vector<long> tap_shift(static_cast<std::size_t>(K));
  std::vector<int> tap_s(static_cast<std::size_t>(K));
  mpz_class r, q, d, w, shift, off, t;
  for (long o = 0; o < n; ++o) {
    r = out.lo + o;
    mpz_fdiv_q_2exp(w.get_mpz_t(), r.get_mpz_t(),
                    static_cast<mp_bitcnt_t>(next.level));
    int s0 = mpz_odd_p(r.get_mpz_t()) ? 1 : 0;
    int ntap = 0;
    for (int s = s0; s < 2 * K; s += 2) {
      t = r - s;
      mpz_fdiv_q_2exp(q.get_mpz_t(), t.get_mpz_t(), 1);
      t = q - prev.lo;
      mpz_fdiv_r_2exp(off.get_mpz_t(), t.get_mpz_t(),
                      static_cast<mp_bitcnt_t>(prev.level));
      if (off > prev_span)
        throw IntervalError("window too small to cover dependency cone");
      mpz_fdiv_q_2exp(d.get_mpz_t(), q.get_mpz_t(),
                      static_cast<mp_bitcnt_t>(prev.level));
      shift = d - w;
      tap_s[ntap] = s;
      tap_off[ntap] = off.get_si();
      tap_shift[ntap] = shift.get_si();
      ++ntap;
    }
    for (int m = 0; m < B; ++m) {
      Interval& acc = out.at(o, m);
      for (int i = 0; i < ntap; ++i) {
        long mf = m + tap_shift[i];
        if (mf < 0 || mf >= B) continue;
        iv_addmul(acc, u.coeffs[tap_s[i]],
                  prev.at(tap_off[i], static_cast<int>(mf)), scratch);
      }
    }
  }
  return out;
}

// f^(n)(offset, m) = sum_i binom(n,i) (-1)^i g^(n)(offset, m-i)
void combine_f(Interval& dst, const LevelData& d, long offset, int m,
               const std::vector<Interval>& coef, MulScratch& scratch) {
  set_zero(dst);
  int imax = std::min<int>(static_cast<int>(coef.size()) - 1, m);
  for (int i = 0; i <= imax; ++i)
    iv_addmul(dst, coef[i], d.at(offset, m - i), scratch);
}

Interval third_factor_of(const DerivedFilter& u, const PrecisionContext& ctx) {
  Interval one = Interval::point_si(1, ctx);
  Interval best = iv_zero(ctx);
  for (int m = 0; m < 2; ++m) {
    Interval part = iv_zero(ctx);
    Interval acc = iv_zero(ctx);
    for (int k = 0; 2 * k + m < 2 * u.K; ++k) {
      iv_add_inplace(part, u.coeffs[2 * k + m]);
      Interval dev = iv_sub(part, one, ctx);
      Interval adev(ctx.precision_bits);
      abs_into(adev, dev);
      iv_add_inplace(acc, adev);
    }
    max_into(best, acc);
  }
  return best;
}

bool exactly_zero(const Interval& a) {
  return mpfr_zero_p(a.lo().get()) && mpfr_zero_p(a.hi().get());
}

TorusWindow ancestor_window(const TorusWindow& w, long l) {
  if (l == w.level) return w;
  return TorusWindow::arc(l, fdiv_2exp(w.a, w.level - l),
                          fdiv_2exp(w.b, w.level - l));
}

}  // namespace

DerivedFilter derive_filter(const FilterBank& bank, int n,
                            const PrecisionContext& ctx) {
  if (n < 0) throw std::invalid_argument("derived order must be nonnegative");
  if (n > bank.N)
    throw std::invalid_argument(
        "derived filter order exceeds vanishing moments");
  DerivedFilter f;
  f.n = n;
  f.K = bank.K;
  f.coeffs.reserve(bank.u0.size());
  for (const Interval& c : bank.u0) f.coeffs.push_back(round_to(c, ctx));
  for (int step = 0; step < n; ++step) {
    std::vector<Interval> next;
    next.reserve(f.coeffs.size());
    Interval s = iv_zero(ctx);
    for (std::size_t k = 0; k < f.coeffs.size(); ++k) {
      s = iv_sub(f.coeffs[k], s, ctx);
      next.push_back(iv_mul_2si(s, 1, ctx));
      // the alternating prefix for the next k reuses s, not 2s
    }
    for (std::size_t k = 0; k < next.size(); ++k)
      f.coeffs[k] = std::move(next[k]);
  }
  return f;
}

TorusWindow TorusWindow::full(long level) {
  TorusWindow w;
  w.level = level;
  w.a = 0;
  w.b = pow2_z(level) - 1;
  w.full_flag = true;
  return w;
}

TorusWindow TorusWindow::arc(long level, mpz_class a, mpz_class b) {
  if (level < 0) throw std::invalid_argument("window level must be >= 0");
  if (a > b) throw std::invalid_argument("window must satisfy a <= b");
  mpz_class mod = pow2_z(level);
  if (a < 0 || a >= mod || b >= 2 * mod)
    throw std::invalid_argument("window must satisfy 0 <= a < 2^j, b < 2^(j+1)");
  TorusWindow w;
  w.level = level;
  w.full_flag = (b - a + 1 >= mod);
  w.a = std::move(a);
  w.b = std::move(b);
  return w;
}

mpz_class TorusWindow::modulus() const { return pow2_z(level); }

bool WindowIndexSet::contains(const mpz_class& k) const {
  mpz_class r = k - lo;
  mpz_fdiv_r_2exp(r.get_mpz_t(), r.get_mpz_t(),
                  static_cast<mp_bitcnt_t>(level));
  return r <= hi - lo;
}

WindowIndexSet window_indices(long j, const mpz_class& a, const mpz_class& b,
                              long l, int K) {
  if (j < 0 || l < 0 || l > j)
    throw std::invalid_argument("window_indices requires 0 <= l <= j");
  if (a > b) throw std::invalid_argument("window_indices requires a <= b");
  WindowIndexSet s;
  s.level = l;
  s.lo = fdiv_2exp(a, j - l) - (2 * K - 2);
  s.hi = fdiv_2exp(b, j - l);
  return s;
}

long LevelData::count() const { return mpz_class(hi - lo + 1).get_si(); }

const Interval* LevelData::lookup(const mpz_class& k) const {
  long off;
  int m;
  if (!arc_locate(lo, hi, level, branches(), k, &off, &m)) return nullptr;
  return &at(off, m);
}

long FunctionEnclosure::count() const {
  return mpz_class(hi - lo + 1).get_si();
}

const Interval* FunctionEnclosure::find(const mpz_class& k) const {
  long off;
  int m;
  if (!arc_locate(lo, hi, j, branches(), k, &off, &m)) return nullptr;
  return &cell_at(off, m);
}

const Interval& FunctionEnclosure::cell(const mpz_class& k) const {
  const Interval* p = find(k);
  if (!p) throw IntervalError("cell index outside retained window");
  return *p;
}

mpz_class cell_index(const mpq_class& x, long j, int K) {
  mpz_class t = x.get_num() + mpz_class(K - 1) * x.get_den();
  mpz_mul_2exp(t.get_mpz_t(), t.get_mpz_t(), static_cast<mp_bitcnt_t>(j));
  mpz_class q;
  mpz_fdiv_q(q.get_mpz_t(), t.get_mpz_t(), x.get_den().get_mpz_t());
  return q;
}

CascadeLadder::CascadeLadder(const FilterBank& bank, int max_order,
                             const PrecisionContext& ctx,
                             std::size_t max_entries, const TorusWindow& start)
    : ctx_(ctx), max_entries_(max_entries ? max_entries : kDefaultMaxEntries) {
  if (max_order < 0) throw std::invalid_argument("max_order must be >= 0");
  filters_.reserve(static_cast<std::size_t>(max_order) + 1);
  for (int n = 0; n <= max_order; ++n)
    filters_.push_back(derive_filter(bank, n, ctx));
  third_.reserve(filters_.size());
  coefs_.resize(filters_.size());
  for (int n = 0; n <= max_order; ++n) {
    third_.push_back(third_factor_of(filters_[n], ctx));
    for (int i = 0; i <= n; ++i)
      coefs_[n].push_back(
          Interval::point_si((i % 2 ? -1 : 1) * binom_l(n, i), ctx));
  }
  window_ = start;
  auto base = std::make_shared<const LevelData>(
      make_level0(bank.K, window_, ctx));
  levels_.assign(filters_.size(), base);
  rows_.resize(filters_.size());
  fmax_.resize(filters_.size());
  certs_.resize(filters_.size());
  record_stats();
}

std::size_t CascadeLadder::entries_for(const TorusWindow& next) const {
  const int B = 2 * filters_[0].K - 1;
  mpz_class total = (next.b - next.a + 1 + (2 * filters_[0].K - 2)) * B *
                    static_cast<long>(filters_.size());
  if (!total.fits_slong_p()) return std::numeric_limits<std::size_t>::max();
  return static_cast<std::size_t>(total.get_si());
}

void CascadeLadder::step(const TorusWindow& next) {
  if (next.level != window_.level + 1)
    throw std::invalid_argument("window level must advance by one");
  if (entries_for(next) > max_entries_)
    throw IntervalError("window too large for memory budget");
  std::vector<std::shared_ptr<const LevelData>> fresh;
  fresh.reserve(levels_.size());
  for (std::size_t o = 0; o < levels_.size(); ++o)
    fresh.push_back(std::make_shared<const LevelData>(
        advance(filters_[o], *levels_[o], next, ctx_, max_entries_)));
  levels_ = std::move(fresh);
  window_ = next;
  record_stats();
  cache_certificates();
}

void CascadeLadder::record_stats() {
  MulScratch scratch(ctx_.precision_bits);
  Interval rs(ctx_.precision_bits), f(ctx_.precision_bits),
      t(ctx_.precision_bits);
  for (std::size_t o = 0; o < levels_.size(); ++o) {
    const LevelData& d = *levels_[o];
    const int B = d.branches();
    Interval rmax = iv_zero(ctx_);
    Interval fmax = iv_zero(ctx_);
    for (long off = 0; off < d.count(); ++off) {
      set_zero(rs);
      for (int m = 0; m < B; ++m) {
        abs_into(t, d.at(off, m));
        iv_add_inplace(rs, t);
        combine_f(f, d, off, m, coefs_[o], scratch);
        abs_into(t, f);
        max_into(fmax, t);
      }
      max_into(rmax, rs);
    }
    rows_[o].push_back(rmax);
    fmax_[o].push_back(fmax);
  }
}

Interval CascadeLadder::alpha_at(int n, long l) const {
  if (n < 0 || n + 1 > max_order())
    throw std::invalid_argument("alpha requires the next derived order");
  if (l < 1 || l > level())
    throw std::invalid_argument("alpha is defined for levels 1..current");
  const Interval& R = rows_[static_cast<std::size_t>(n) + 1]
                          [static_cast<std::size_t>(l)];
  Interval a(ctx_.precision_bits);
  Real t(ctx_.precision_bits);
  mpfr_log2(t.get(), R.hi().get(), MPFR_RNDU);
  mpfr_div_si(t.get(), t.get(), l, MPFR_RNDU);
  mpfr_si_sub(a.lo().get(), 1, t.get(), MPFR_RNDD);
  mpfr_log2(t.get(), R.lo().get(), MPFR_RNDD);  // -inf when the bound is 0
  mpfr_div_si(t.get(), t.get(), l, MPFR_RNDD);
  mpfr_si_sub(a.hi().get(), 1, t.get(), MPFR_RNDU);
  a.check_valid("alpha_bound");
  return a;
}

Interval CascadeLadder::c_at(int n, long l) const {
  if (n < 0 || n + 1 > max_order())
    throw std::invalid_argument("error constant requires the next derived order");
  if (l < 1 || l > level())
    throw std::invalid_argument("error constant is defined for levels 1..current");
  const Interval& T = third_[static_cast<std::size_t>(n)];
  if (exactly_zero(T)) return iv_zero(ctx_);
  Interval alpha = alpha_at(n, l);
  Interval one = Interval::point_si(1, ctx_);
  Interval den = iv_sub(one, iv_pow2(iv_neg(alpha, ctx_), ctx_), ctx_);
  if (!den.strictly_positive())
    throw IntervalError("no contraction certificate at this level");
  Interval lead = iv_div(one, den, ctx_);
  Interval am1 = iv_sub(alpha, one, ctx_);
  const auto& M = fmax_[static_cast<std::size_t>(n) + 1];
  Interval mid = M[0];
  for (long lp = 1; lp < l; ++lp) {
    Interval pw = iv_pow2(iv_mul(am1, Interval::point_si(lp, ctx_), ctx_), ctx_);
    Interval term = iv_mul(pw, M[static_cast<std::size_t>(lp)], ctx_);
    max_into(mid, term);
  }
  return iv_mul(iv_mul(lead, mid, ctx_), T, ctx_);
}

void CascadeLadder::cache_certificates() {
  const long j = level();
  if (j < 1) return;
  for (int n = 0; n + 1 <= max_order(); ++n) {
    if (exactly_zero(third_[static_cast<std::size_t>(n)])) continue;
    Interval alpha = alpha_at(n, j);
    if (!alpha.strictly_positive() || !alpha.is_finite()) continue;
    try {
      Interval c = c_at(n, j);
      certs_[static_cast<std::size_t>(n)].push_back(
          CertPair{j, std::move(alpha), std::move(c)});
    } catch (const IntervalError&) {
      // contraction not certifiable at this level; later levels may succeed
    }
  }
}

CascadeLadder::Certificate CascadeLadder::certificate(int n) const {
  if (n < 0 || n + 1 > max_order())
    throw std::invalid_argument("certificate requires the next derived order");
  const long j = level();
  Certificate cert;
  cert.alpha = (j >= 1) ? alpha_at(n, j) : iv_entire(ctx_);
  if (exactly_zero(third_[static_cast<std::size_t>(n)])) {
    cert.c = iv_zero(ctx_);
    cert.eps = iv_zero(ctx_);
    cert.from_level = j;
    cert.valid = true;
    return cert;
  }
  cert.c = iv_pos_inf(ctx_);
  cert.eps = iv_pos_inf(ctx_);
  cert.from_level = -1;
  cert.valid = false;
  Interval jpt = Interval::point_si(j, ctx_);
  for (const CertPair& p : certs_[static_cast<std::size_t>(n)]) {
    Interval decay =
        iv_pow2(iv_neg(iv_mul(p.alpha, jpt, ctx_), ctx_), ctx_);
    Interval eps = iv_mul(p.c, decay, ctx_);
    if (!cert.valid ||
        mpfr_cmp(eps.hi().get(), cert.eps.hi().get()) < 0) {
      cert.alpha = p.alpha;
      cert.c = p.c;
      cert.eps = std::move(eps);
      cert.from_level = p.level;
      cert.valid = true;
    }
  }
  return cert;
}

FunctionEnclosure CascadeLadder::enclosure(int n, bool allow_uncertified) const {
  Certificate cert = certificate(n);
  if (!cert.valid && !allow_uncertified)
    throw IntervalError("no contraction certificate at this level");
  const LevelData& d = *levels_[static_cast<std::size_t>(n)];
  FunctionEnclosure e;
  e.n = n;
  e.j = level();
  e.K = d.K;
  e.window = window_;
  e.lo = d.lo;
  e.hi = d.hi;
  if (n == 0) {
    e.cells = d.g;
  } else {
    MulScratch scratch(ctx_.precision_bits);
    const int B = d.branches();
    e.cells.assign(d.g.size(), Interval(ctx_.precision_bits));
    for (long off = 0; off < d.count(); ++off)
      for (int m = 0; m < B; ++m)
        combine_f(e.cells[static_cast<std::size_t>(off) * B + m], d, off, m,
                  coefs_[static_cast<std::size_t>(n)], scratch);
  }
  e.alpha = std::move(cert.alpha);
  e.c_const = std::move(cert.c);
  e.eps = std::move(cert.eps);
  e.certificate_level = cert.from_level;
  return e;
}

LevelData cascade_g(const DerivedFilter& filter, long j,
                    const TorusWindow& window, const PrecisionContext& ctx) {
  if (j < 0) throw std::invalid_argument("cascade level must be >= 0");
  if (window.level != j)
    throw std::invalid_argument("window level must equal the cascade level");
  LevelData cur = make_level0(filter.K, ancestor_window(window, 0), ctx);
  for (long l = 1; l <= j; ++l)
    cur = advance(filter, cur, ancestor_window(window, l), ctx,
                  kDefaultMaxEntries);
  return cur;
}

namespace {

CascadeLadder oneshot_ladder(const FilterBank& bank, int max_order, long j,
                             const TorusWindow& window,
                             const PrecisionContext& ctx) {
  if (j < 0) throw std::invalid_argument("cascade level must be >= 0");
  if (window.level != j)
    throw std::invalid_argument("window level must equal the cascade level");
  CascadeLadder lad(bank, max_order, ctx, 0, ancestor_window(window, 0));
  for (long l = 1; l <= j; ++l) lad.step(ancestor_window(window, l));
  return lad;
}

}  // namespace

FunctionEnclosure cascade_f(const FilterBank& bank, int n, long j,
                            const TorusWindow& window,
                            const PrecisionContext& ctx,
                            bool allow_uncertified) {
  if (n < 0) throw std::invalid_argument("derived order must be nonnegative");
  CascadeLadder lad = oneshot_ladder(bank, n + 1, j, window, ctx);
  return lad.enclosure(n, allow_uncertified);
}

Interval alpha_bound(const FilterBank& bank, int n, long j,
                     const TorusWindow& window, const PrecisionContext& ctx) {
  if (j < 1) throw std::invalid_argument("alpha_bound requires j >= 1");
  CascadeLadder lad = oneshot_ladder(bank, n + 1, j, window, ctx);
  return lad.alpha_at(n, j);
}

Interval error_constant(const FilterBank& bank, int n, long j,
                        const TorusWindow& window, const PrecisionContext& ctx) {
  if (j < 1) throw std::invalid_argument("error_constant requires j >= 1");
  CascadeLadder lad = oneshot_ladder(bank, n + 1, j, window, ctx);
  return lad.c_at(n, j);
}

}  // namespace sbr
