#pragma once

// Expected time-averaged conditional variance, E[ int_0^1 Var[B(t) | givens] dt ],
// for the conditioning sets with closed-form moments.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "bmcond/estimator.hpp"
#include "bmcond/moments.hpp"
#include "bmcond/simulation.hpp"

namespace bmcond {

namespace detail {

template <class F>
double integrate(F&& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 12, 1e-11);
}

// int_0^1 (3s - s^2 - G11(s)^2) ds: the variance of the post-maximum piece per unit horizon.
inline double post_piece_variance_integral() {
  return integrate([](double s) { const double g = g11(s); return 3.0 * s - s * s - g * g; }, 0.0, 1.0);
}

// Arcsine average, theta = sin^2(phi) makes the weight (2/pi) dphi.
template <class F>
double arcsine_average(F&& f) {
  return integrate([&](double phi) { const double s = std::sin(phi); return f(s * s); }, 0.0, 0.5 * kPi) * 2.0 / kPi;
}

}  // namespace detail

/// nullopt when the conditioning set has no closed form here.
inline std::optional<double> analytic_time_avg_variance(AnalyticFamily family) {
  switch (family) {
    case AnalyticFamily::unconditional:
      return 0.5;
    case AnalyticFamily::close:
      return 1.0 / 6.0;
    case AnalyticFamily::argmax:
      return detail::arcsine_average([](double theta) {
        return detail::integrate([&](double t) { return cond_moments_given_theta(t, theta).variance; }, 0.0, theta) +
               detail::integrate([&](double t) { return cond_moments_given_theta(t, theta).variance; }, theta, 1.0);
      });
    case AnalyticFamily::argmax_high: {
      // Given theta, h / sqrt(theta) is Rayleigh and the pre-maximum piece is a
      // meander of horizon theta ending at that value.
      const double rayleigh_part = detail::integrate(
          [](double r) {
            if (r == 0.0) return 0.0;
            return r * std::exp(-0.5 * r * r) *
                   detail::integrate([&](double s) { return meander_var(s, r); }, 0.0, 1.0);
          },
          0.0, 12.0);
      const double post = detail::post_piece_variance_integral();
      return detail::arcsine_average([&](double theta) {
        return theta * theta * rayleigh_part + (1.0 - theta) * (1.0 - theta) * post;
      });
    }
    default:
      return std::nullopt;
  }
}

/// Rows of the variance-reduction table, in display order.
inline std::vector<StudySpec> variance_table_rows() {
  using D = Dimension;
  return {{"start only", {}},
          {"close", {D::close}},
          {"high", {D::high}},
          {"argmax", {D::argmax}},
          {"close+high", {D::close, D::high}},
          {"close+argmax", {D::close, D::argmax}},
          {"argmax+high", {D::argmax, D::high}},
          {"close+high+argmax", {D::close, D::high, D::argmax}},
          {"close+high+low", {D::close, D::high, D::low}}};
}

}  // namespace bmcond
