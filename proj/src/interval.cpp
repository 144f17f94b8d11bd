#include "sbr/interval.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace sbr {

namespace {

void throw_if_nan(mpfr_srcptr x, const char* where) {
  if (mpfr_nan_p(x)) throw IntervalError(std::string(where) + ": NaN endpoint");
}

// Sign class of an interval: P (lo >= 0), N (hi <= 0), M (straddles zero).
enum class SignClass { P, N, M };

SignClass classify(const Interval& a) {
  if (mpfr_sgn(a.lo().get()) >= 0) return SignClass::P;
  if (mpfr_sgn(a.hi().get()) <= 0) return SignClass::N;
  return SignClass::M;
}

// r_lo/r_hi must not alias the operands.
void mul_core(mpfr_ptr r_lo, mpfr_ptr r_hi, const Interval& a,
              const Interval& b) {
  mpfr_srcptr al = a.lo().get(), ah = a.hi().get();
  mpfr_srcptr bl = b.lo().get(), bh = b.hi().get();
  SignClass ca = classify(a), cb = classify(b);
  switch (ca) {
    case SignClass::P:
      switch (cb) {
        case SignClass::P:
          mpfr_mul(r_lo, al, bl, MPFR_RNDD);
          mpfr_mul(r_hi, ah, bh, MPFR_RNDU);
          return;
        case SignClass::N:
          mpfr_mul(r_lo, ah, bl, MPFR_RNDD);
          mpfr_mul(r_hi, al, bh, MPFR_RNDU);
          return;
        case SignClass::M:
          mpfr_mul(r_lo, ah, bl, MPFR_RNDD);
          mpfr_mul(r_hi, ah, bh, MPFR_RNDU);
          return;
      }
      break;
    case SignClass::N:
      switch (cb) {
        case SignClass::P:
          mpfr_mul(r_lo, al, bh, MPFR_RNDD);
          mpfr_mul(r_hi, ah, bl, MPFR_RNDU);
          return;
        case SignClass::N:
          mpfr_mul(r_lo, ah, bh, MPFR_RNDD);
          mpfr_mul(r_hi, al, bl, MPFR_RNDU);
          return;
        case SignClass::M:
          mpfr_mul(r_lo, al, bh, MPFR_RNDD);
          mpfr_mul(r_hi, al, bl, MPFR_RNDU);
          return;
      }
      break;
    case SignClass::M:
      switch (cb) {
        case SignClass::P:
          mpfr_mul(r_lo, al, bh, MPFR_RNDD);
          mpfr_mul(r_hi, ah, bh, MPFR_RNDU);
          return;
        case SignClass::N:
          mpfr_mul(r_lo, ah, bl, MPFR_RNDD);
          mpfr_mul(r_hi, al, bl, MPFR_RNDU);
          return;
        case SignClass::M: {
          // min(al*bh, ah*bl) and max(al*bl, ah*bh), each outward.
          mpfr_prec_t p = mpfr_get_prec(r_lo);
          Real t(p);
          mpfr_mul(r_lo, al, bh, MPFR_RNDD);
          mpfr_mul(t.get(), ah, bl, MPFR_RNDD);
          mpfr_min(r_lo, r_lo, t.get(), MPFR_RNDD);
          mpfr_mul(r_hi, al, bl, MPFR_RNDU);
          mpfr_mul(t.get(), ah, bh, MPFR_RNDU);
          mpfr_max(r_hi, r_hi, t.get(), MPFR_RNDU);
          return;
        }
      }
      break;
  }
}

}  // namespace

Real::Real(mpfr_prec_t prec) {
  mpfr_init2(value_, prec);
  mpfr_set_zero(value_, 1);
}

Real::Real(const Real& other) {
  mpfr_init2(value_, mpfr_get_prec(other.value_));
  mpfr_set(value_, other.value_, MPFR_RNDN);
}

Real::Real(Real&& other) noexcept {
  mpfr_init2(value_, mpfr_get_prec(other.value_));
  mpfr_swap(value_, other.value_);
}

Real& Real::operator=(const Real& other) {
  if (this != &other) {
    mpfr_set_prec(value_, mpfr_get_prec(other.value_));
    mpfr_set(value_, other.value_, MPFR_RNDN);
  }
  return *this;
}

Real& Real::operator=(Real&& other) noexcept {
  if (this != &other) mpfr_swap(value_, other.value_);
  return *this;
}

Real::~Real() { mpfr_clear(value_); }

Interval Interval::point_double(double x, const PrecisionContext& ctx) {
  Interval r(ctx.precision_bits);
  mpfr_set_d(r.lo_.get(), x, MPFR_RNDD);
  mpfr_set_d(r.hi_.get(), x, MPFR_RNDU);
  r.check_valid("point_double");
  return r;
}

Interval Interval::point_si(long x, const PrecisionContext& ctx) {
  Interval r(ctx.precision_bits);
  mpfr_set_si(r.lo_.get(), x, MPFR_RNDD);
  mpfr_set_si(r.hi_.get(), x, MPFR_RNDU);
  return r;
}

Interval Interval::point_z(mpz_srcptr x, const PrecisionContext& ctx) {
  Interval r(ctx.precision_bits);
  mpfr_set_z(r.lo_.get(), x, MPFR_RNDD);
  mpfr_set_z(r.hi_.get(), x, MPFR_RNDU);
  return r;
}

Interval Interval::from_strings(const std::string& lo, const std::string& hi,
                                const PrecisionContext& ctx) {
  Interval r(ctx.precision_bits);
  char* end = nullptr;
  mpfr_strtofr(r.lo_.get(), lo.c_str(), &end, 10, MPFR_RNDD);
  if (end == lo.c_str() || *end != '\0')
    throw IntervalError("from_strings: malformed decimal '" + lo + "'");
  mpfr_strtofr(r.hi_.get(), hi.c_str(), &end, 10, MPFR_RNDU);
  if (end == hi.c_str() || *end != '\0')
    throw IntervalError("from_strings: malformed decimal '" + hi + "'");
  r.check_valid("from_strings");
  return r;
}

Interval Interval::from_endpoints(const Real& lo, const Real& hi) {
  Interval r(lo.prec() > hi.prec() ? lo.prec() : hi.prec());
  mpfr_set(r.lo_.get(), lo.get(), MPFR_RNDD);
  mpfr_set(r.hi_.get(), hi.get(), MPFR_RNDU);
  r.check_valid("from_endpoints");
  return r;
}

double Interval::mid_double() const {
  Real m(lo_.prec() + 8);
  mpfr_add(m.get(), lo_.get(), hi_.get(), MPFR_RNDN);
  mpfr_div_2si(m.get(), m.get(), 1, MPFR_RNDN);
  return m.to_double(MPFR_RNDN);
}

bool Interval::contains_zero() const {
  return mpfr_sgn(lo_.get()) <= 0 && mpfr_sgn(hi_.get()) >= 0;
}

bool Interval::contains_si(long x) const {
  return mpfr_cmp_si(lo_.get(), x) <= 0 && mpfr_cmp_si(hi_.get(), x) >= 0;
}

bool Interval::contains(const Interval& inner) const {
  return mpfr_cmp(lo_.get(), inner.lo_.get()) <= 0 &&
         mpfr_cmp(hi_.get(), inner.hi_.get()) >= 0;
}

bool Interval::intersects(const Interval& other) const {
  return mpfr_cmp(lo_.get(), other.hi_.get()) <= 0 &&
         mpfr_cmp(other.lo_.get(), hi_.get()) <= 0;
}

bool Interval::is_finite() const {
  return mpfr_number_p(lo_.get()) && mpfr_number_p(hi_.get());
}

bool Interval::strictly_positive() const { return mpfr_sgn(lo_.get()) > 0; }

bool Interval::strictly_negative() const { return mpfr_sgn(hi_.get()) < 0; }

Real Interval::mag_upper() const {
  Real m(lo_.prec());
  if (mpfr_cmpabs(lo_.get(), hi_.get()) >= 0)
    mpfr_abs(m.get(), lo_.get(), MPFR_RNDU);
  else
    mpfr_abs(m.get(), hi_.get(), MPFR_RNDU);
  return m;
}

Real Interval::width_upper() const {
  Real w(lo_.prec());
  mpfr_sub(w.get(), hi_.get(), lo_.get(), MPFR_RNDU);
  return w;
}

std::pair<std::string, std::string> Interval::to_strings() const {
  int digits = static_cast<int>(static_cast<double>(lo_.prec()) * 0.30103) + 3;
  char* s = nullptr;
  mpfr_asprintf(&s, "%.*RDe", digits, lo_.get());
  std::string lo_str(s);
  mpfr_free_str(s);
  mpfr_asprintf(&s, "%.*RUe", digits, hi_.get());
  std::string hi_str(s);
  mpfr_free_str(s);
  return {lo_str, hi_str};
}

void Interval::check_valid(const char* where) const {
  throw_if_nan(lo_.get(), where);
  throw_if_nan(hi_.get(), where);
  if (mpfr_cmp(lo_.get(), hi_.get()) > 0)
    throw IntervalError(std::string(where) + ": inverted endpoints");
}

Interval iv_add(const Interval& a, const Interval& b,
                const PrecisionContext& ctx) {
  Interval r(ctx.precision_bits);
  mpfr_add(r.lo().get(), a.lo().get(), b.lo().get(), MPFR_RNDD);
  mpfr_add(r.hi().get(), a.hi().get(), b.hi().get(), MPFR_RNDU);
  r.check_valid("iv_add");
  return r;
}

Interval iv_sub(const Interval& a, const Interval& b,
                const PrecisionContext& ctx) {
  Interval r(ctx.precision_bits);
  mpfr_sub(r.lo().get(), a.lo().get(), b.hi().get(), MPFR_RNDD);
  mpfr_sub(r.hi().get(), a.hi().get(), b.lo().get(), MPFR_RNDU);
  r.check_valid("iv_sub");
  return r;
}

Interval iv_mul(const Interval& a, const Interval& b,
                const PrecisionContext& ctx) {
  Interval r(ctx.precision_bits);
  mul_core(r.lo().get(), r.hi().get(), a, b);
  r.check_valid("iv_mul");
  return r;
}

Interval iv_div(const Interval& a, const Interval& b,
                const PrecisionContext& ctx) {
  if (b.contains_zero())
    throw IntervalError("iv_div: divisor interval contains zero");
  Interval r(ctx.precision_bits);
  mpfr_srcptr al = a.lo().get(), ah = a.hi().get();
  mpfr_srcptr bl = b.lo().get(), bh = b.hi().get();
  if (mpfr_sgn(bl) > 0) {
    switch (classify(a)) {
      case SignClass::P:
        mpfr_div(r.lo().get(), al, bh, MPFR_RNDD);
        mpfr_div(r.hi().get(), ah, bl, MPFR_RNDU);
        break;
      case SignClass::N:
        mpfr_div(r.lo().get(), al, bl, MPFR_RNDD);
        mpfr_div(r.hi().get(), ah, bh, MPFR_RNDU);
        break;
      case SignClass::M:
        mpfr_div(r.lo().get(), al, bl, MPFR_RNDD);
        mpfr_div(r.hi().get(), ah, bl, MPFR_RNDU);
        break;
    }
  } else {
    switch (classify(a)) {
      case SignClass::P:
        mpfr_div(r.lo().get(), ah, bh, MPFR_RNDD);
        mpfr_div(r.hi().get(), al, bl, MPFR_RNDU);
        break;
      case SignClass::N:
        mpfr_div(r.lo().get(), ah, bl, MPFR_RNDD);
        mpfr_div(r.hi().get(), al, bh, MPFR_RNDU);
        break;
      case SignClass::M:
        mpfr_div(r.lo().get(), ah, bh, MPFR_RNDD);
        mpfr_div(r.hi().get(), al, bh, MPFR_RNDU);
        break;
    }
  }
  r.check_valid("iv_div");
  return r;
}

Interval iv_neg(const Interval& a, const PrecisionContext& ctx) {
  Interval r(ctx.precision_bits);
  mpfr_neg(r.lo().get(), a.hi().get(), MPFR_RNDD);
  mpfr_neg(r.hi().get(), a.lo().get(), MPFR_RNDU);
  return r;
}

Interval iv_sqr(const Interval& a, const PrecisionContext& ctx) {
  Interval r(ctx.precision_bits);
  switch (classify(a)) {
    case SignClass::P:
      mpfr_sqr(r.lo().get(), a.lo().get(), MPFR_RNDD);
      mpfr_sqr(r.hi().get(), a.hi().get(), MPFR_RNDU);
      break;
    case SignClass::N:
      mpfr_sqr(r.lo().get(), a.hi().get(), MPFR_RNDD);
      mpfr_sqr(r.hi().get(), a.lo().get(), MPFR_RNDU);
      break;
    case SignClass::M:
      mpfr_set_zero(r.lo().get(), 1);
      if (mpfr_cmpabs(a.lo().get(), a.hi().get()) >= 0)
        mpfr_sqr(r.hi().get(), a.lo().get(), MPFR_RNDU);
      else
        mpfr_sqr(r.hi().get(), a.hi().get(), MPFR_RNDU);
      break;
  }
  r.check_valid("iv_sqr");
  return r;
}

Interval iv_sqrt(const Interval& a, const PrecisionContext& ctx) {
  if (mpfr_sgn(a.lo().get()) < 0)
    throw IntervalError("iv_sqrt: interval extends below zero");
  Interval r(ctx.precision_bits);
  mpfr_sqrt(r.lo().get(), a.lo().get(), MPFR_RNDD);
  mpfr_sqrt(r.hi().get(), a.hi().get(), MPFR_RNDU);
  r.check_valid("iv_sqrt");
  return r;
}

Interval iv_log(const Interval& a, const PrecisionContext& ctx) {
  if (mpfr_sgn(a.lo().get()) <= 0)
    throw IntervalError("iv_log: interval not strictly positive");
  Interval r(ctx.precision_bits);
  mpfr_log(r.lo().get(), a.lo().get(), MPFR_RNDD);
  mpfr_log(r.hi().get(), a.hi().get(), MPFR_RNDU);
  r.check_valid("iv_log");
  return r;
}

Interval iv_log2(const Interval& a, const PrecisionContext& ctx) {
  if (mpfr_sgn(a.lo().get()) <= 0)
    throw IntervalError("iv_log2: interval not strictly positive");
  Interval r(ctx.precision_bits);
  mpfr_log2(r.lo().get(), a.lo().get(), MPFR_RNDD);
  mpfr_log2(r.hi().get(), a.hi().get(), MPFR_RNDU);
  r.check_valid("iv_log2");
  return r;
}

Interval iv_exp(const Interval& a, const PrecisionContext& ctx) {
  Interval r(ctx.precision_bits);
  mpfr_exp(r.lo().get(), a.lo().get(), MPFR_RNDD);
  mpfr_exp(r.hi().get(), a.hi().get(), MPFR_RNDU);
  r.check_valid("iv_exp");
  return r;
}

Interval iv_pow2(const Interval& a, const PrecisionContext& ctx) {
  Interval r(ctx.precision_bits);
  mpfr_exp2(r.lo().get(), a.lo().get(), MPFR_RNDD);
  mpfr_exp2(r.hi().get(), a.hi().get(), MPFR_RNDU);
  r.check_valid("iv_pow2");
  return r;
}

Interval iv_abs(const Interval& a, const PrecisionContext& ctx) {
  Interval r(ctx.precision_bits);
  switch (classify(a)) {
    case SignClass::P:
      mpfr_set(r.lo().get(), a.lo().get(), MPFR_RNDD);
      mpfr_set(r.hi().get(), a.hi().get(), MPFR_RNDU);
      break;
    case SignClass::N:
      mpfr_neg(r.lo().get(), a.hi().get(), MPFR_RNDD);
      mpfr_neg(r.hi().get(), a.lo().get(), MPFR_RNDU);
      break;
    case SignClass::M:
      mpfr_set_zero(r.lo().get(), 1);
      if (mpfr_cmpabs(a.lo().get(), a.hi().get()) >= 0)
        mpfr_abs(r.hi().get(), a.lo().get(), MPFR_RNDU);
      else
        mpfr_abs(r.hi().get(), a.hi().get(), MPFR_RNDU);
      break;
  }
  return r;
}

Interval iv_min(const Interval& a, const Interval& b,
                const PrecisionContext& ctx) {
  Interval r(ctx.precision_bits);
  mpfr_min(r.lo().get(), a.lo().get(), b.lo().get(), MPFR_RNDD);
  mpfr_min(r.hi().get(), a.hi().get(), b.hi().get(), MPFR_RNDU);
  return r;
}

Interval iv_max(const Interval& a, const Interval& b,
                const PrecisionContext& ctx) {
  Interval r(ctx.precision_bits);
  mpfr_max(r.lo().get(), a.lo().get(), b.lo().get(), MPFR_RNDD);
  mpfr_max(r.hi().get(), a.hi().get(), b.hi().get(), MPFR_RNDU);
  return r;
}

Interval iv_hull(const Interval& a, const Interval& b,
                 const PrecisionContext& ctx) {
  Interval r(ctx.precision_bits);
  mpfr_min(r.lo().get(), a.lo().get(), b.lo().get(), MPFR_RNDD);
  mpfr_max(r.hi().get(), a.hi().get(), b.hi().get(), MPFR_RNDU);
  return r;
}

Interval iv_intersect(const Interval& a, const Interval& b,
                      const PrecisionContext& ctx) {
  if (!a.intersects(b))
    throw IntervalError("iv_intersect: empty intersection");
  Interval r(ctx.precision_bits);
  // max-of-los rounded down and min-of-his rounded up cannot invert when
  // the true intersection is nonempty.
  mpfr_max(r.lo().get(), a.lo().get(), b.lo().get(), MPFR_RNDD);
  mpfr_min(r.hi().get(), a.hi().get(), b.hi().get(), MPFR_RNDU);
  r.check_valid("iv_intersect");
  return r;
}

Interval iv_mul_2si(const Interval& a, long e, const PrecisionContext& ctx) {
  Interval r(ctx.precision_bits);
  mpfr_mul_2si(r.lo().get(), a.lo().get(), e, MPFR_RNDD);
  mpfr_mul_2si(r.hi().get(), a.hi().get(), e, MPFR_RNDU);
  return r;
}

Interval iv_const_pi(const PrecisionContext& ctx) {
  Interval r(ctx.precision_bits);
  mpfr_const_pi(r.lo().get(), MPFR_RNDD);
  mpfr_const_pi(r.hi().get(), MPFR_RNDU);
  return r;
}

Interval iv_const_log2(const PrecisionContext& ctx) {
  Interval r(ctx.precision_bits);
  mpfr_const_log2(r.lo().get(), MPFR_RNDD);
  mpfr_const_log2(r.hi().get(), MPFR_RNDU);
  return r;
}

Interval iv_normal_cdf(const Interval& a, const PrecisionContext& ctx) {
  Interval sqrt2(ctx.precision_bits);
  mpfr_sqrt_ui(sqrt2.lo().get(), 2, MPFR_RNDD);
  mpfr_sqrt_ui(sqrt2.hi().get(), 2, MPFR_RNDU);
  Interval t = iv_div(a, sqrt2, ctx);
  Interval e(ctx.precision_bits);
  mpfr_erf(e.lo().get(), t.lo().get(), MPFR_RNDD);
  mpfr_erf(e.hi().get(), t.hi().get(), MPFR_RNDU);
  Interval r(ctx.precision_bits);
  mpfr_add_si(r.lo().get(), e.lo().get(), 1, MPFR_RNDD);
  mpfr_add_si(r.hi().get(), e.hi().get(), 1, MPFR_RNDU);
  mpfr_div_2si(r.lo().get(), r.lo().get(), 1, MPFR_RNDD);
  mpfr_div_2si(r.hi().get(), r.hi().get(), 1, MPFR_RNDU);
  r.check_valid("iv_normal_cdf");
  return r;
}

Interval iv_arith(IvOp op, std::span<const Interval> args,
                  const PrecisionContext& ctx) {
  auto need = [&](size_t n) {
    if (args.size() != n)
      throw IntervalError("iv_arith: wrong argument count");
  };
  switch (op) {
    case IvOp::add: need(2); return iv_add(args[0], args[1], ctx);
    case IvOp::sub: need(2); return iv_sub(args[0], args[1], ctx);
    case IvOp::mul: need(2); return iv_mul(args[0], args[1], ctx);
    case IvOp::div: need(2); return iv_div(args[0], args[1], ctx);
    case IvOp::sqrt: need(1); return iv_sqrt(args[0], ctx);
    case IvOp::log: need(1); return iv_log(args[0], ctx);
    case IvOp::exp: need(1); return iv_exp(args[0], ctx);
    case IvOp::pow2: need(1); return iv_pow2(args[0], ctx);
    case IvOp::abs: need(1); return iv_abs(args[0], ctx);
    case IvOp::min: need(2); return iv_min(args[0], args[1], ctx);
    case IvOp::max: need(2); return iv_max(args[0], args[1], ctx);
  }
  throw IntervalError("iv_arith: unknown operation");
}

void iv_addmul(Interval& acc, const Interval& a, const Interval& b,
               MulScratch& scratch) {
  mul_core(scratch.lo.get(), scratch.hi.get(), a, b);
  mpfr_add(acc.lo().get(), acc.lo().get(), scratch.lo.get(), MPFR_RNDD);
  mpfr_add(acc.hi().get(), acc.hi().get(), scratch.hi.get(), MPFR_RNDU);
}

void iv_add_inplace(Interval& acc, const Interval& a) {
  mpfr_add(acc.lo().get(), acc.lo().get(), a.lo().get(), MPFR_RNDD);
  mpfr_add(acc.hi().get(), acc.hi().get(), a.hi().get(), MPFR_RNDU);
}

void real_add_abs_up(Real& acc, const Interval& a) {
  mpfr_srcptr big = mpfr_cmpabs(a.lo().get(), a.hi().get()) >= 0
                        ? a.lo().get()
                        : a.hi().get();
  if (mpfr_sgn(big) >= 0)
    mpfr_add(acc.get(), acc.get(), big, MPFR_RNDU);
  else
    mpfr_sub(acc.get(), acc.get(), big, MPFR_RNDU);
}

void real_max_up(Real& acc, const Real& candidate) {
  mpfr_max(acc.get(), acc.get(), candidate.get(), MPFR_RNDU);
}

}  // namespace sbr
