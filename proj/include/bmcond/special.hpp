#pragma once

// Gaussian helpers shared by the density, moment and binning code.

#include <cmath>
#include <numbers>

#include <boost/math/distributions/normal.hpp>

#include "bmcond/errors.hpp"

namespace bmcond {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSqrt2 = std::numbers::sqrt2;
inline constexpr double kSqrtPi = 1.7724538509055160273;
inline constexpr double kSqrt2Pi = 2.5066282746310005024;
inline constexpr double kSqrt2OverPi = 0.79788456080286535588;
inline constexpr double kSqrtPiOver2 = 1.2533141373155002512;

/// Centered Gaussian density with variance `var`: (2 pi var)^{-1/2} exp(-x^2 / 2 var).
inline double gaussian_pdf(double var, double x) {
  return std::exp(-0.5 * x * x / var) / std::sqrt(2.0 * kPi * var);
}

inline double log_gaussian_pdf(double var, double x) {
  return -0.5 * x * x / var - 0.5 * std::log(2.0 * kPi * var);
}

/// Mass of N(0, var) on [a, b]. A zero variance is a point mass at 0 split evenly
/// between the two half lines, which is the limit the meander formulas use at t = 1.
inline double gaussian_mass(double var, double a, double b) {
  if (var <= 0.0) {
    auto side = [](double v) { return v > 0.0 ? 0.5 : (v < 0.0 ? -0.5 : 0.0); };
    return side(b) - side(a);
  }
  const double scale = 1.0 / std::sqrt(2.0 * var);
  // Same-sign tails are evaluated through erfc to avoid cancellation.
  if (a >= 0.0) return 0.5 * (std::erfc(a * scale) - std::erfc(b * scale));
  if (b <= 0.0) return 0.5 * (std::erfc(-b * scale) - std::erfc(-a * scale));
  return 0.5 * (std::erf(b * scale) - std::erf(a * scale));
}

inline double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

inline double standard_normal_quantile(double p) {
  detail::require(p > 0.0 && p < 1.0, "standard_normal_quantile: p must lie in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

}  // namespace bmcond
