#include "sbr/asymptotics.hpp"

#include <cmath>
#include <stdexcept>

namespace sbr {

namespace {

constexpr double kLog2 = 0.6931471805599453094172321214581766;

void check_level(double j) {
  if (!(j >= 1.0) || !std::isfinite(j))
    throw std::invalid_argument("resolution level must be at least 1");
}

void check_gamma(double g) {
  if (!(g > 0.0) || !(g < 1.0))
    throw std::invalid_argument("tail level must lie strictly in (0, 1)");
}

void check_upsilon(double u) {
  if (!(u > -1.0) || !std::isfinite(u))
    throw std::invalid_argument("curvature ratio must exceed -1");
}

Interval iv_one(const PrecisionContext& ctx) {
  return Interval::point_si(1, ctx);
}

// j/2 is exact in binary; 2^(j/2) via the outward power-of-two kernel.
Interval pow2_half_j(double j, const PrecisionContext& ctx) {
  Interval h = iv_mul_2si(Interval::point_double(j, ctx), -1, ctx);
  return iv_pow2(h, ctx);
}

}  // namespace

double a_of(double j) {
  check_level(j);
  return std::sqrt(2.0 * kLog2 * j);
}

double b_of(double j, double upsilon) {
  check_level(j);
  check_upsilon(upsilon);
  const double a = std::sqrt(2.0 * kLog2 * j);
  const double bracket =
      std::log(M_PI * kLog2) + std::log(j) - 0.5 * std::log1p(upsilon);
  return a - bracket / (2.0 * a);
}

double c_of(double j, const BandConstants& c) {
  check_level(j);
  if (!(c.sigma > 0.0) || !std::isfinite(c.sigma))
    throw std::invalid_argument("noise scale must be positive");
  const double sbsq = c.sigma_bar_sq.mid_double();
  if (!(sbsq > 0.0))
    throw std::invalid_argument("variance maximum must be positive");
  return std::sqrt(sbsq) / c.sigma * std::exp2(0.5 * j);
}

double x_of(double gamma) {
  check_gamma(gamma);
  return -std::log(-std::log1p(-gamma));
}

double normalized_threshold(const CriticalQuery& q, double upsilon) {
  return x_of(q.gamma) / a_of(q.j) + b_of(q.j, upsilon);
}

double critical_value(const CriticalQuery& q, const BandConstants& c) {
  return c_of(q.j, c) * normalized_threshold(q, c.upsilon.mid_double());
}

Interval a_iv(double j, const PrecisionContext& ctx) {
  check_level(j);
  Interval t = iv_mul(iv_mul_2si(iv_const_log2(ctx), 1, ctx),
                      Interval::point_double(j, ctx), ctx);
  return iv_sqrt(t, ctx);
}

Interval b_iv(double j, const Interval& upsilon, const PrecisionContext& ctx) {
  check_level(j);
  check_upsilon(upsilon.lo_double());
  Interval a = a_iv(j, ctx);
  Interval pl = iv_log(iv_mul(iv_const_pi(ctx), iv_const_log2(ctx), ctx), ctx);
  Interval lj = iv_log(Interval::point_double(j, ctx), ctx);
  Interval half =
      iv_mul_2si(iv_log(iv_add(iv_one(ctx), upsilon, ctx), ctx), -1, ctx);
  Interval bracket = iv_sub(iv_add(pl, lj, ctx), half, ctx);
  return iv_sub(a, iv_div(bracket, iv_mul_2si(a, 1, ctx), ctx), ctx);
}

Interval c_iv(double j, const Interval& sigma_bar_sq, double sigma,
              const PrecisionContext& ctx) {
  check_level(j);
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw std::invalid_argument("noise scale must be positive");
  if (!sigma_bar_sq.strictly_positive())
    throw std::invalid_argument("variance maximum must be positive");
  Interval scale = iv_div(iv_sqrt(sigma_bar_sq, ctx),
                          Interval::point_double(sigma, ctx), ctx);
  return iv_mul(scale, pow2_half_j(j, ctx), ctx);
}

Interval x_iv(const Interval& gamma, const PrecisionContext& ctx) {
  if (!(gamma.lo_double() > 0.0) || !(gamma.hi_double() < 1.0))
    throw std::invalid_argument("tail level must lie strictly in (0, 1)");
  Interval inner = iv_neg(iv_log(iv_sub(iv_one(ctx), gamma, ctx), ctx), ctx);
  return iv_neg(iv_log(inner, ctx), ctx);
}

Interval normalized_threshold_iv(const CriticalQuery& q,
                                 const Interval& upsilon,
                                 const PrecisionContext& ctx) {
  Interval x = x_iv(Interval::point_double(q.gamma, ctx), ctx);
  return iv_add(iv_div(x, a_iv(q.j, ctx), ctx), b_iv(q.j, upsilon, ctx), ctx);
}

Interval critical_value_iv(const CriticalQuery& q, const BandConstants& c,
                           const PrecisionContext& ctx) {
  return iv_mul(c_iv(q.j, c.sigma_bar_sq, c.sigma, ctx),
                normalized_threshold_iv(q, c.upsilon, ctx), ctx);
}

}  // namespace sbr
