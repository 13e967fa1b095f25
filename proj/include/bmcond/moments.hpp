#pragma once

// Closed-form first and second moments of conditioned Brownian motion.
//
// Meander moments M1, M2 are the building blocks. Conditioning on (c, theta, h)
// splices two rescaled meanders at theta; integrating the final value out gives
// the (theta, h) ladder, and integrating h out gives the theta ladder.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "bmcond/analytic_core.hpp"
#include "bmcond/errors.hpp"
#include "bmcond/special.hpp"

namespace bmcond {

struct MomentPair {
  double mean = 0.0;
  double variance = 0.0;
};

/// Mean and variance along a time grid, either analytic or empirical.
struct MomentCurve {
  std::vector<double> times;
  std::vector<double> means;
  std::vector<double> variances;
  std::string label;

  [[nodiscard]] std::size_t size() const { return times.size(); }
};

namespace detail {

inline double clamp_variance(double v) { return v < 0.0 ? 0.0 : v; }

/// M1(s, t, c) - s c / t. Splitting off the linear part keeps the variance free of
/// the c^2 s^2 cancellation when c is large.
inline double meander_m1_excess(double s, double t, double c) {
  const double tau = t - s;
  const double k = std::sqrt(s / (2.0 * t * tau));  // erf argument per unit c
  const double tail = std::sqrt(2.0 * s * tau / (kPi * t)) * std::exp(-0.5 * s * c * c / (t * tau));
  // erf(k c) / c loses all precision as c -> 0; switch to its Taylor series.
  if (c < 1e-4 * std::sqrt(t * tau / s)) {
    const double z2 = k * k * c * c;
    const double erf_over_c = 2.0 * k / kSqrtPi * (1.0 - z2 / 3.0 + z2 * z2 / 10.0);
    return (tau + s * c * c / t) * erf_over_c - s * c / t + tail;
  }
  const double z = k * c;
  return tau * std::erf(z) / c - s * c / t * std::erfc(z) + tail;
}

}  // namespace detail

/// First moment of the meander at s given its value c at time t.
inline double meander_m1(double s, double t, double c) {
  detail::require(t > 0.0 && s >= 0.0 && s <= t, "meander_m1: need 0 <= s <= t, t > 0");
  detail::require(c >= 0.0, "meander_m1: c must be nonnegative");
  if (s == 0.0) return 0.0;
  if (s == t) return c;
  return s * c / t + detail::meander_m1_excess(s, t, c);
}

/// Second moment of the meander at s given its value c at time t.
inline double meander_m2(double s, double t, double c) {
  detail::require(t > 0.0 && s >= 0.0 && s <= t, "meander_m2: need 0 <= s <= t, t > 0");
  detail::require(c >= 0.0, "meander_m2: c must be nonnegative");
  return 3.0 * s * (t - s) / t + c * c * s * s / (t * t);
}

/// Variance of the unit-horizon meander at s with endpoint c.
inline double meander_var(double s, double c) {
  detail::require(s >= 0.0 && s <= 1.0, "meander_var: s must lie in [0,1]");
  if (s == 0.0 || s == 1.0) return 0.0;
  detail::require(c >= 0.0, "meander_var: c must be nonnegative");
  const double excess = detail::meander_m1_excess(s, 1.0, c);
  return detail::clamp_variance(3.0 * s * (1.0 - s) - 2.0 * s * c * excess - excess * excess);
}

namespace detail {

// Each conditional ladder has a branch before and after theta; both are defined
// at t = theta, where they must agree.

inline MomentPair cth_before(double t, const ExtremaTriple& p) {
  const double s = 1.0 - t / p.theta;
  const double root = std::sqrt(p.theta);
  const double r = p.h / root;
  return {p.h - root * meander_m1(s, 1.0, r), p.theta * meander_var(s, r)};
}

inline MomentPair cth_after(double t, const ExtremaTriple& p) {
  const double om = 1.0 - p.theta;
  const double s = std::min(1.0, (t - p.theta) / om);
  const double root = std::sqrt(om);
  const double q = (p.h - p.c) / root;
  return {p.h - root * meander_m1(s, 1.0, q), om * meander_var(s, q)};
}

}  // namespace detail

/// Moments of B(t) given (c, theta, h).
inline MomentPair cond_moments_given_c_theta_h(double t, const ExtremaTriple& p) {
  detail::require_triple(p);
  detail::require_unit_time(t);
  if (t == 0.0) return {0.0, 0.0};
  if (t == 1.0) return {p.c, 0.0};
  if (t == p.theta) return {p.h, 0.0};
  return t < p.theta ? detail::cth_before(t, p) : detail::cth_after(t, p);
}

/// G11(s) = sqrt(2/pi) [atan(sqrt(s/(1-s))) + sqrt(s(1-s))], the first moment of M1
/// against the Rayleigh weight.
inline double g11(double s) {
  detail::require(s >= 0.0 && s <= 1.0, "g11: s must lie in [0,1]");
  // atan2 form has the s -> 1 limit pi/2 built in and never forms s/(1-s).
  return kSqrt2OverPi * (std::atan2(std::sqrt(s), std::sqrt(1.0 - s)) + std::sqrt(s * (1.0 - s)));
}

namespace detail {

inline MomentPair th_after(double t, double theta, double h) {
  const double om = 1.0 - theta;
  const double s = std::min(1.0, (t - theta) / om);
  const double g = g11(s);
  return {h - std::sqrt(om) * g, clamp_variance(om * (3.0 * s - s * s - g * g))};
}

}  // namespace detail

/// Moments of B(t) given (theta, h), final value integrated out.
inline MomentPair cond_moments_given_theta_h(double t, double theta, double h) {
  detail::require_theta(theta);
  detail::require_unit_time(t);
  detail::require(h >= 0.0, "cond_moments_given_theta_h: h must be nonnegative");
  if (t == 0.0) return {0.0, 0.0};
  if (t <= theta) return detail::cth_before(t, ExtremaTriple{theta, h, 0.0});
  return detail::th_after(t, theta, h);
}

/// Moments of B(1) given theta. The variance 2 - pi/2 does not depend on theta.
inline MomentPair b1_moments_given_theta(double theta) {
  detail::require_theta(theta);
  return {kSqrtPiOver2 * (std::sqrt(theta) - std::sqrt(1.0 - theta)), 2.0 - 0.5 * kPi};
}

namespace detail {

inline MomentPair theta_before(double t, double theta) {
  const double s = std::max(0.0, 1.0 - t / theta);
  const double mean = std::sqrt(0.5 * kPi * theta) - std::sqrt(theta) * g11(s);
  const double second = 2.0 * theta - 4.0 * theta * std::sqrt(s) + theta * (3.0 * s - s * s);
  return {mean, clamp_variance(second - mean * mean)};
}

inline MomentPair theta_after(double t, double theta) {
  const double om = 1.0 - theta;
  const double s = std::min(1.0, (t - theta) / om);
  const double g = g11(s);
  const double var_h = (2.0 - 0.5 * kPi) * theta;  // Var[h | theta]
  return {std::sqrt(0.5 * kPi * theta) - std::sqrt(om) * g, clamp_variance(var_h + om * (3.0 * s - s * s - g * g))};
}

}  // namespace detail

/// Moments of B(t) given only theta.
inline MomentPair cond_moments_given_theta(double t, double theta) {
  detail::require_theta(theta);
  detail::require_unit_time(t);
  if (t == 0.0) return {0.0, 0.0};
  if (t == 1.0) return b1_moments_given_theta(theta);
  return t <= theta ? detail::theta_before(t, theta) : detail::theta_after(t, theta);
}

/// Brownian bridge to c: mean c t, variance t (1 - t).
inline MomentPair cond_moments_given_c(double t, double c) {
  detail::require_unit_time(t);
  return {c * t, t * (1.0 - t)};
}

/// Unconditioned Brownian motion started at 0.
inline MomentPair unconditional_moments(double t) {
  detail::require_unit_time(t);
  return {0.0, t};
}

// ---------------------------------------------------------------------------
// Integral identities behind the meander moments and the theta/(theta,h) ladders.

enum class AppendixIntegral {
  xk_sinh_1,     ///< int_0^inf x   exp(-a x^2) sinh(b x) dx
  xk_sinh_2,     ///< int_0^inf x^2 exp(-a x^2) sinh(b x) dx
  xk_sinh_3,     ///< int_0^inf x^3 exp(-a x^2) sinh(b x) dx
  g11_integral,  ///< int_0^inf x M1(s,x) exp(-x^2/2) dx, kappa form
  m2_weighted,   ///< int_0^inf x M2(s,x) exp(-x^2/2) dx
  g12_integral,  ///< int_0^inf x^2 M1(s,x) exp(-x^2/2) dx, kappa form
};

struct AppendixParams {
  double a = 1.0;
  double b = 0.0;
  double s = 0.0;
};

inline double sinh_gauss_moment(int k, double a, double b) {
  detail::require(a > 0.0, "sinh_gauss_moment: a must be positive");
  const double e = std::exp(0.25 * b * b / a);
  switch (k) {
    case 1:
      return kSqrtPi * b / (4.0 * std::pow(a, 1.5)) * e;
    case 2:
      return kSqrtPi * (2.0 * a + b * b) * e * std::erf(0.5 * b / std::sqrt(a)) /
                 (8.0 * std::pow(a, 2.5)) +
             b / (4.0 * a * a);
    case 3:
      return kSqrtPi * b * (6.0 * a + b * b) * e / (16.0 * std::pow(a, 3.5));
    default:
      detail::fail_domain("sinh_gauss_moment: k must be 1, 2 or 3");
  }
}

/// Kappa form of G11; agrees with g11(s).
inline double g11_integral(double s) {
  detail::require(s >= 0.0 && s <= 1.0, "g11_integral: s must lie in [0,1]");
  if (s > 1.0 - 1e-12) return kSqrtPiOver2;
  const double kappa = s / (1.0 - s);
  const double rk = std::sqrt(kappa);
  return kSqrt2OverPi * (std::atan(rk) + s * rk / (kappa + 1.0) + std::sqrt(s * std::pow(1.0 - s, 3)));
}

inline double m2_weighted_integral(double s) {
  detail::require(s >= 0.0 && s <= 1.0, "m2_weighted_integral: s must lie in [0,1]");
  return 3.0 * s - s * s;
}

/// Kappa form of G12; reduces to 2 sqrt(s).
inline double g12_integral(double s) {
  detail::require(s >= 0.0 && s <= 1.0, "g12_integral: s must lie in [0,1]");
  if (s > 1.0 - 1e-12) return 2.0 * std::sqrt(s);
  const double kappa = s / (1.0 - s);
  const double rk = std::sqrt(kappa);
  const double sigma = std::sqrt(s * (1.0 - s));
  return (1.0 - s) * rk / std::sqrt(1.0 + kappa) +
         s * rk * (2.0 * kappa + 3.0) / std::pow(1.0 + kappa, 1.5) + sigma * std::pow(1.0 - s, 1.5);
}

inline double appendix_integral(AppendixIntegral kind, const AppendixParams& p) {
  switch (kind) {
    case AppendixIntegral::xk_sinh_1:
      return sinh_gauss_moment(1, p.a, p.b);
    case AppendixIntegral::xk_sinh_2:
      return sinh_gauss_moment(2, p.a, p.b);
    case AppendixIntegral::xk_sinh_3:
      return sinh_gauss_moment(3, p.a, p.b);
    case AppendixIntegral::g11_integral:
      return g11_integral(p.s);
    case AppendixIntegral::m2_weighted:
      return m2_weighted_integral(p.s);
    case AppendixIntegral::g12_integral:
      return g12_integral(p.s);
  }
  detail::fail_domain("appendix_integral: unknown kind");
}

// ---------------------------------------------------------------------------
// Curves on a caller-supplied time grid.

namespace detail {

inline void require_time_grid(const std::vector<double>& times) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    require_unit_time(times[i]);
    if (i > 0) require(times[i] > times[i - 1], "time grid must be strictly increasing");
  }
}

template <class Fn>
MomentCurve tabulate(const std::vector<double>& times, std::string label, Fn&& fn) {
  require_time_grid(times);
  MomentCurve curve;
  curve.times = times;
  curve.label = std::move(label);
  curve.means.reserve(times.size());
  curve.variances.reserve(times.size());
  for (double t : times) {
    const MomentPair m = fn(t);
    curve.means.push_back(m.mean);
    curve.variances.push_back(m.variance);
  }
  return curve;
}

}  // namespace detail

inline MomentCurve curve_given_c_theta_h(const std::vector<double>& times, const ExtremaTriple& p) {
  return detail::tabulate(times, "close,argmax,high",
                          [&](double t) { return cond_moments_given_c_theta_h(t, p); });
}

inline MomentCurve curve_given_theta_h(const std::vector<double>& times, double theta, double h) {
  return detail::tabulate(times, "argmax,high",
                          [&](double t) { return cond_moments_given_theta_h(t, theta, h); });
}

inline MomentCurve curve_given_theta(const std::vector<double>& times, double theta) {
  return detail::tabulate(times, "argmax", [&](double t) { return cond_moments_given_theta(t, theta); });
}

/// n points evenly spaced on [0,1], n >= 2.
inline std::vector<double> uniform_time_grid(std::size_t n) {
  detail::require(n >= 2, "uniform_time_grid: need at least two points");
  std::vector<double> times(n);
  for (std::size_t i = 0; i < n; ++i) times[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  times.back() = 1.0;
  return times;
}

}  // namespace bmcond
