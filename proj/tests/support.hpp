#pragma once

// Test-only oracles: adaptive quadrature independent of the closed forms, a
// one-sample Kolmogorov-Smirnov statistic, and small random generators for
// property checks.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace bmtest {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Adaptive Gauss-Kronrod on [a, b]; infinite limits are mapped internally.
template <class F>
double quad(F&& f, double a, double b, double tol = 1e-12) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, tol);
}

/// Splits [a, b] at the given interior points before integrating.
template <class F>
double quad_split(F&& f, std::vector<double> points, double tol = 1e-12) {
  double total = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) total += quad(f, points[i - 1], points[i], tol);
  return total;
}

/// Average of f(theta) against the arcsine law, via theta = sin^2(phi).
template <class F>
double arcsine_expectation(F&& f, double tol = 1e-11) {
  return quad([&](double phi) { const double s = std::sin(phi); return f(s * s); }, 0.0, M_PI / 2, tol) * 2.0 / M_PI;
}

/// sup |F_n - F| for the sample against a continuous cdf.
template <class Cdf>
double ks_statistic(std::vector<double> sample, Cdf&& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

inline double ks_critical_1pct(std::size_t n) { return 1.63 / std::sqrt(static_cast<double>(n)); }

/// Deterministic parameter generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }
  /// A valid (theta, h, c): theta in (lo, 1-lo), c normal, h above max(0, c).
  struct Triple {
    double theta, h, c;
  };
  Triple triple(double lo = 0.02) {
    const double theta = uniform(lo, 1.0 - lo);
    const double c = 1.2 * normal();
    const double h = std::max(0.0, c) + uniform(0.01, 2.5);
    return {theta, h, c};
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace bmtest
