#ifndef SBR_INTERVAL_HPP
#define SBR_INTERVAL_HPP

#include <mpfr.h>

#include <span>
#include <stdexcept>
#include <string>
#include <utility>

namespace sbr {

// Thrown on domain violations (division by an interval containing zero,
// log of a non-positive interval, malformed input, ...). Never silently
// produces NaN endpoints.
struct IntervalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Working precision, in significand bits, for interval endpoints.
struct PrecisionContext {
  mpfr_prec_t precision_bits = 256;
};

// RAII wrapper around a single mpfr_t.
class Real {
 public:
  explicit Real(mpfr_prec_t prec);
  Real(const Real& other);
  Real(Real&& other) noexcept;
  Real& operator=(const Real& other);
  Real& operator=(Real&& other) noexcept;
  ~Real();

  mpfr_ptr get() { return value_; }
  mpfr_srcptr get() const { return value_; }
  mpfr_prec_t prec() const { return mpfr_get_prec(value_); }
  double to_double(mpfr_rnd_t rnd) const { return mpfr_get_d(value_, rnd); }

 private:
  mpfr_t value_;
};

// Closed interval [lo, hi] with arbitrary-precision endpoints. Every
// operation rounds outward, so results always contain the exact image set.
class Interval {
 public:
  explicit Interval(mpfr_prec_t prec) : lo_(prec), hi_(prec) {}

  static Interval point_double(double x, const PrecisionContext& ctx);
  static Interval point_si(long x, const PrecisionContext& ctx);
  static Interval point_z(mpz_srcptr x, const PrecisionContext& ctx);
  // Decimal endpoints, rounded outward while parsing.
  static Interval from_strings(const std::string& lo, const std::string& hi,
                               const PrecisionContext& ctx);
  static Interval from_endpoints(const Real& lo, const Real& hi);

  const Real& lo() const { return lo_; }
  const Real& hi() const { return hi_; }
  Real& lo() { return lo_; }
  Real& hi() { return hi_; }

  double lo_double() const { return lo_.to_double(MPFR_RNDD); }
  double hi_double() const { return hi_.to_double(MPFR_RNDU); }
  // Midpoint rounded to nearest double; for point-valued downstream use.
  double mid_double() const;

  bool contains_zero() const;
  bool contains_si(long x) const;
  bool contains(const Interval& inner) const;
  bool intersects(const Interval& other) const;
  bool is_finite() const;
  bool strictly_positive() const;  // lo > 0
  bool strictly_negative() const;  // hi < 0

  // Upper bound of |interval|, rounded up, at the interval's own precision.
  Real mag_upper() const;
  Real width_upper() const;
  double width_double() const { return width_upper().to_double(MPFR_RNDU); }

  // Decimal serialization: (lo rounded down, hi rounded up), enough digits
  // to reparse without widening past one ulp per endpoint.
  std::pair<std::string, std::string> to_strings() const;

  void check_valid(const char* where) const;

 private:
  Real lo_, hi_;
};

enum class IvOp { add, sub, mul, div, sqrt, log, exp, pow2, abs, min, max };

// Generic dispatcher matching the operation table; unary ops take one
// argument, the rest take two.
Interval iv_arith(IvOp op, std::span<const Interval> args,
                  const PrecisionContext& ctx);

Interval iv_add(const Interval& a, const Interval& b,
                const PrecisionContext& ctx);
Interval iv_sub(const Interval& a, const Interval& b,
                const PrecisionContext& ctx);
Interval iv_mul(const Interval& a, const Interval& b,
                const PrecisionContext& ctx);
Interval iv_div(const Interval& a, const Interval& b,
                const PrecisionContext& ctx);
Interval iv_neg(const Interval& a, const PrecisionContext& ctx);
Interval iv_sqr(const Interval& a, const PrecisionContext& ctx);
Interval iv_sqrt(const Interval& a, const PrecisionContext& ctx);
Interval iv_log(const Interval& a, const PrecisionContext& ctx);
Interval iv_log2(const Interval& a, const PrecisionContext& ctx);
Interval iv_exp(const Interval& a, const PrecisionContext& ctx);
Interval iv_pow2(const Interval& a, const PrecisionContext& ctx);  // 2^x
Interval iv_abs(const Interval& a, const PrecisionContext& ctx);
Interval iv_min(const Interval& a, const Interval& b,
                const PrecisionContext& ctx);
Interval iv_max(const Interval& a, const Interval& b,
                const PrecisionContext& ctx);

// Smallest interval containing both operands.
Interval iv_hull(const Interval& a, const Interval& b,
                 const PrecisionContext& ctx);
// Intersection; throws IntervalError when empty (soundness violation
// upstream, since callers only intersect enclosures of one real number).
Interval iv_intersect(const Interval& a, const Interval& b,
                      const PrecisionContext& ctx);

// Exact scaling by 2^e (no rounding in binary floating point).
Interval iv_mul_2si(const Interval& a, long e, const PrecisionContext& ctx);

Interval iv_const_pi(const PrecisionContext& ctx);
Interval iv_const_log2(const PrecisionContext& ctx);  // ln 2
// Standard normal CDF via erf, outward rounded.
Interval iv_normal_cdf(const Interval& a, const PrecisionContext& ctx);

// In-place accumulation primitives for hot loops; scratch avoids repeated
// endpoint allocation. acc and scratch must share the target precision.
struct MulScratch {
  explicit MulScratch(mpfr_prec_t prec) : lo(prec), hi(prec) {}
  Real lo, hi;
};
void iv_addmul(Interval& acc, const Interval& a, const Interval& b,
               MulScratch& scratch);
void iv_add_inplace(Interval& acc, const Interval& a);
// acc += |a| on a bare upper bound (used for row sums of certificates).
void real_add_abs_up(Real& acc, const Interval& a);
void real_max_up(Real& acc, const Real& candidate);

}  // namespace sbr

#endif
