#pragma once

// Closed-form densities of Brownian motion on [0,1] conditioned on its maximum
// (h), the first time the maximum is attained (theta) and its final value (c):
// extrema densities, Brownian meander transition densities, and the
// two-meander (Williams) splice of a path around its maximum.

#include <cmath>
#include <limits>
#include <variant>

#include "bmcond/errors.hpp"
#include "bmcond/special.hpp"

namespace bmcond {

/// theta closer than this to 0 or 1 is rejected: the densities grow like theta^{-3/2}.
inline constexpr double kThetaGuard = 1e-9;

/// Location, value and final value of a path's maximum.
struct ExtremaTriple {
  double theta = 0.5;  ///< time of the maximum, in (0,1)
  double h = 0.0;      ///< maximum, h >= 0
  double c = 0.0;      ///< final value B(1), c <= h

  static ExtremaTriple make(double theta, double h, double c);
};

/// Degenerate conditional law: all mass sits at `location`. `mass` is 1 for
/// conditional densities and the joint weight for joint densities.
struct PointMass {
  double location = 0.0;
  double mass = 1.0;
};

using DensityValue = std::variant<double, PointMass>;

/// Intermediate symbols of the meander moment integrals for the pair (s, t) and
/// endpoint c. kappa and sigma refer to the unit horizon (t = 1).
struct MeanderKernelParams {
  double tau = 0.0;    ///< t - s
  double a = 0.0;      ///< t / (2 s (t - s))
  double b = 0.0;      ///< c / (t - s)
  double kappa = 0.0;  ///< s / (1 - s); +inf when s is within 1e-12 of 1
  double sigma = 0.0;  ///< sqrt(s (1 - s))
  double mu = 0.0;     ///< sqrt(s / t)

  static MeanderKernelParams make(double s, double t, double c);
};

namespace detail {

inline void require_theta(double theta) {
  require(theta >= kThetaGuard && theta <= 1.0 - kThetaGuard,
          "theta must lie in (0,1) away from the endpoints");
}

inline void require_unit_time(double t) {
  require(t >= 0.0 && t <= 1.0, "time must lie in [0,1]");
}

inline void require_triple(const ExtremaTriple& p) {
  require_theta(p.theta);
  require(p.h >= 0.0, "maximum h must be nonnegative");
  require(p.h >= p.c, "maximum h must be at least the final value c");
  require(std::isfinite(p.h) && std::isfinite(p.c), "extrema must be finite");
}

/// log g_t(a, b) for a, b >= 0; -inf when either vanishes.
inline double log_g_kernel(double t, double a, double b) {
  const double z = 2.0 * a * b / t;
  if (z <= 0.0) return -std::numeric_limits<double>::infinity();
  return log_gaussian_pdf(t, b - a) + std::log(-std::expm1(-z));
}

/// log(g_t(a, b) / b) for a > 0, b >= 0, finite in the limit b -> 0.
inline double log_g_over_b(double t, double a, double b) {
  const double z = 2.0 * a * b / t;
  const double ratio = z < 1e-8 ? (2.0 * a / t) * (1.0 - 0.5 * z) : -std::expm1(-z) / b;
  return log_gaussian_pdf(t, b - a) + std::log(ratio);
}

inline double log_density_theta_h(double theta, double h) {
  return std::log(h) - 0.5 * h * h / theta - std::log(kPi) - 1.5 * std::log(theta) -
         0.5 * std::log1p(-theta);
}

}  // namespace detail

inline ExtremaTriple ExtremaTriple::make(double theta, double h, double c) {
  ExtremaTriple p{theta, h, c};
  detail::require_triple(p);
  return p;
}

inline MeanderKernelParams MeanderKernelParams::make(double s, double t, double c) {
  detail::require(s > 0.0 && s < t, "meander kernel needs 0 < s < t");
  MeanderKernelParams k;
  k.tau = t - s;
  k.a = t / (2.0 * s * (t - s));
  k.b = c / (t - s);
  k.kappa = s > 1.0 - 1e-12 ? std::numeric_limits<double>::infinity() : s / (1.0 - s);
  k.sigma = s >= 1.0 ? 0.0 : std::sqrt(s * (1.0 - s));
  k.mu = std::sqrt(s / t);
  return k;
}

/// Reflected Gaussian kernel g_t(x, y) = phi_t(y - x) - phi_t(y + x).
inline double g_kernel(double t, double x, double y) {
  detail::require(t > 0.0, "g_kernel: t must be positive");
  return gaussian_pdf(t, y - x) - gaussian_pdf(t, y + x);
}

/// Joint density of (theta, h, c).
inline double joint_density_theta_h_c(const ExtremaTriple& p) {
  detail::require_triple(p);
  const double d = p.h - p.c;
  if (p.h == 0.0 || d == 0.0) return 0.0;
  const double th = p.theta, om = 1.0 - p.theta;
  return p.h * d / (kPi * std::pow(th * om, 1.5)) *
         std::exp(-0.5 * p.h * p.h / th - 0.5 * d * d / om);
}

/// Density of (theta, h) given B(1) = c.
inline double density_theta_h_given_c(double theta, double h, double c) {
  detail::require_triple(ExtremaTriple{theta, h, c});
  const double d = h - c;
  if (h == 0.0 || d == 0.0) return 0.0;
  const double th = theta, om = 1.0 - theta;
  return h * d * kSqrt2Pi / (kPi * std::pow(th * om, 1.5)) *
         std::exp(0.5 * c * c - 0.5 * h * h / th - 0.5 * d * d / om);
}

/// Density of (theta, h) with the final value integrated out.
inline double density_theta_h(double theta, double h) {
  detail::require_theta(theta);
  detail::require(h >= 0.0, "density_theta_h: h must be nonnegative");
  if (h == 0.0) return 0.0;
  return std::exp(detail::log_density_theta_h(theta, h));
}

/// Rayleigh density of h given theta, scale sqrt(theta).
inline double density_h_given_theta(double h, double theta) {
  detail::require_theta(theta);
  detail::require(h >= 0.0, "density_h_given_theta: h must be nonnegative");
  return h / theta * std::exp(-0.5 * h * h / theta);
}

/// Joint density of (h, c).
inline double density_h_c(double h, double c) {
  detail::require(h >= 0.0 && h >= c, "density_h_c: need h >= max(0, c)");
  const double u = 2.0 * h - c;
  return kSqrt2OverPi * u * std::exp(-0.5 * u * u);
}

/// Half-normal density of the maximum.
inline double marginal_density_h(double h) {
  detail::require(h >= 0.0, "marginal_density_h: h must be nonnegative");
  return kSqrt2OverPi * std::exp(-0.5 * h * h);
}

/// Arcsine density of the location of the maximum.
inline double marginal_density_theta(double theta) {
  detail::require_theta(theta);
  return 1.0 / (kPi * std::sqrt(theta * (1.0 - theta)));
}

/// Joint density of (theta, c), with h integrated out.
inline double density_theta_c(double theta, double c) {
  detail::require_theta(theta);
  const double om = 1.0 - theta;
  const double root = kPi * std::sqrt(theta * om);
  const double tail = (c * c - 1.0) * std::exp(-0.5 * c * c) / kSqrt2Pi;
  if (c > 0.0) {
    return c * theta * std::exp(-0.5 * c * c / theta) / root -
           tail * std::erfc(c * std::sqrt(om / (2.0 * theta)));
  }
  const double kappa = theta / om;
  const double ac = -c;
  return ac * om * std::exp(-0.5 * c * c / om) / root - tail * std::erfc(ac * std::sqrt(0.5 * kappa));
}

/// Meander transition density p(B(t) = y | B(s) = x). s = 0 gives the one-point
/// marginal of the meander at t (x is ignored).
inline double meander_transition(double s, double x, double t, double y) {
  detail::require(s >= 0.0 && s < t && t <= 1.0, "meander_transition: need 0 <= s < t <= 1");
  detail::require(y >= 0.0, "meander_transition: y must be nonnegative");
  if (y == 0.0) return 0.0;
  if (s == 0.0) {
    return 2.0 * y * std::pow(t, -1.5) * std::exp(-0.5 * y * y / t) * gaussian_mass(1.0 - t, 0.0, y);
  }
  detail::require(x > 0.0, "meander_transition: x must be positive");
  return g_kernel(t - s, x, y) * gaussian_mass(1.0 - t, 0.0, y) / gaussian_mass(1.0 - s, 0.0, x);
}

/// Meander density at s given its value c at the later time t (Bayes reversal).
inline double meander_reverse_transition(double s, double x, double t, double c) {
  detail::require(s > 0.0 && s < t && t <= 1.0, "meander_reverse_transition: need 0 < s < t <= 1");
  detail::require(c > 0.0, "meander_reverse_transition: c must be positive");
  detail::require(x >= 0.0, "meander_reverse_transition: x must be nonnegative");
  if (x == 0.0) return 0.0;
  const double log_val = detail::log_g_kernel(t - s, x, c) + std::log(x / c) +
                         1.5 * std::log(t / s) - 0.5 * x * x / s + 0.5 * c * c / t;
  return std::exp(log_val);
}

/// Unit-horizon form of the reverse transition: g_{s(1-s)}(x, s c) x / (s c).
inline double meander_reverse_transition_unit(double s, double x, double c) {
  detail::require(s > 0.0 && s < 1.0, "meander_reverse_transition_unit: need 0 < s < 1");
  detail::require(c > 0.0 && x >= 0.0, "meander_reverse_transition_unit: need c > 0, x >= 0");
  if (x == 0.0) return 0.0;
  const double cs = s * c;
  return std::exp(detail::log_g_kernel(s * (1.0 - s), x, cs)) * x / cs;
}

/// Density of B(t) given (theta, h, c): a meander hanging below h on each side of theta.
/// t = theta is a point mass at h; t = 0 and t = 1 are point masses at 0 and c.
inline DensityValue spliced_density_given_thc(double x, double t, const ExtremaTriple& p) {
  detail::require_triple(p);
  detail::require_unit_time(t);
  if (t == p.theta) return PointMass{p.h, 1.0};
  if (t == 0.0) return PointMass{0.0, 1.0};
  if (t == 1.0) return PointMass{p.c, 1.0};
  if (x >= p.h) return 0.0;
  const double a = p.h - x;
  if (t < p.theta) {
    const double gap = p.theta - t;
    const double log_val = detail::log_g_over_b(t, a, p.h) + 1.5 * std::log(p.theta / gap) +
                           std::log(a) + 0.5 * p.h * p.h / p.theta - 0.5 * a * a / gap;
    return std::exp(log_val);
  }
  const double gap = t - p.theta;
  const double om = 1.0 - p.theta;
  const double d = p.h - p.c;
  const double log_val = detail::log_g_over_b(1.0 - t, a, d) + 1.5 * std::log(om / gap) +
                         std::log(a) - 0.5 * a * a / gap + 0.5 * d * d / om;
  return std::exp(log_val);
}

/// Joint density of (B(t) = x, theta, h, c).
inline DensityValue joint_density_x_thc(double x, double t, const ExtremaTriple& p) {
  detail::require_triple(p);
  detail::require_unit_time(t);
  const double weight = joint_density_theta_h_c(p);
  if (t == p.theta) return PointMass{p.h, weight};
  if (t == 0.0) return PointMass{0.0, weight};
  if (t == 1.0) return PointMass{p.c, weight};
  if (x >= p.h) return 0.0;
  const double a = p.h - x;
  const double d = p.h - p.c;
  if (d == 0.0 || p.h == 0.0) return 0.0;
  if (t < p.theta) {
    const double gap = p.theta - t;
    const double log_val = std::log(d * a / kPi) - 1.5 * std::log((1.0 - p.theta) * gap) +
                           detail::log_g_kernel(t, a, p.h) - 0.5 * a * a / gap -
                           0.5 * d * d / (1.0 - p.theta);
    return std::exp(log_val);
  }
  const double gap = t - p.theta;
  const double log_val = std::log(p.h * a / kPi) - 1.5 * std::log(p.theta * gap) +
                         detail::log_g_kernel(1.0 - t, a, d) - 0.5 * a * a / gap -
                         0.5 * p.h * p.h / p.theta;
  return std::exp(log_val);
}

/// Joint density of (B(t) = x, theta, h) with the final value integrated out.
/// t = theta is a point mass at h carrying p(theta, h); t = 0 a point mass at 0.
inline DensityValue joint_density_x_th(double x, double t, double theta, double h) {
  detail::require_theta(theta);
  detail::require_unit_time(t);
  detail::require(h > 0.0, "joint_density_x_th: h must be positive");
  if (t == theta) return PointMass{h, density_theta_h(theta, h)};
  if (t == 0.0) return PointMass{0.0, density_theta_h(theta, h)};
  if (x >= h) return 0.0;
  const double a = h - x;
  if (t < theta) {
    const double gap = theta - t;
    const double log_val = std::log(a / kPi) - 0.5 * std::log1p(-theta) - 1.5 * std::log(gap) +
                           detail::log_g_kernel(t, a, h) - 0.5 * a * a / gap;
    return std::exp(log_val);
  }
  const double gap = t - theta;
  const double spread = 1.0 - t;
  const double cdf = spread <= 0.0 ? 1.0 : std::erf(a / std::sqrt(2.0 * spread));
  const double log_val = std::log(h * a / kPi) - 1.5 * std::log(theta * gap) + std::log(cdf) -
                         0.5 * a * a / gap - 0.5 * h * h / theta;
  return std::exp(log_val);
}

/// Density of B(t) given (theta, h). For t < theta it does not depend on the final value.
inline DensityValue density_x_given_th(double x, double t, double theta, double h) {
  detail::require_theta(theta);
  detail::require_unit_time(t);
  detail::require(h > 0.0, "density_x_given_th: h must be positive");
  if (t == theta) return PointMass{h, 1.0};
  if (t == 0.0) return PointMass{0.0, 1.0};
  if (x >= h) return 0.0;
  const double a = h - x;
  const double log_norm = detail::log_density_theta_h(theta, h);
  if (t < theta) {
    const double gap = theta - t;
    // g_t(a, h) / h keeps the h -> 0 limit finite; log h cancels against p(theta, h).
    const double log_val = std::log(a / kPi) - 0.5 * std::log1p(-theta) - 1.5 * std::log(gap) +
                           detail::log_g_over_b(t, a, h) - 0.5 * a * a / gap -
                           (log_norm - std::log(h));
    return std::exp(log_val);
  }
  const double gap = t - theta;
  const double spread = 1.0 - t;
  const double cdf = spread <= 0.0 ? 1.0 : std::erf(a / std::sqrt(2.0 * spread));
  const double log_val = std::log(h * a / kPi) - 1.5 * std::log(theta * gap) + std::log(cdf) -
                         0.5 * a * a / gap - 0.5 * h * h / theta - log_norm;
  return std::exp(log_val);
}

}  // namespace bmcond
