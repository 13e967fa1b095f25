#pragma once

// Discrete Brownian paths, their extrema statistics, and exact one-shot samplers
// for the laws of the maximum, its location and the final value.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "bmcond/errors.hpp"
#include "bmcond/random.hpp"
#include "bmcond/special.hpp"

namespace bmcond {

/// Brownian path sampled on the uniform grid k / n_steps, k = 0..n_steps.
struct Path {
  std::vector<double> values;  ///< values[0] == 0

  [[nodiscard]] std::size_t n_steps() const { return values.size() - 1; }
  [[nodiscard]] double dt() const { return 1.0 / static_cast<double>(n_steps()); }
};

/// Extrema statistics of one discrete path.
struct PathSummary {
  double close = 0.0;
  double high = 0.0;
  double low = 0.0;
  double argmax = 0.0;  ///< interpolated location of the maximum, in (0,1]
  std::size_t argmax_grid_index = 0;
};

/// Fills out[0..n] with a path of n = out.size() - 1 independent N(0, 1/n) steps.
inline void fill_standard_path(std::span<double> out, RandomSource& rng) {
  detail::require(out.size() >= 2, "fill_standard_path: need at least one step");
  const double sd = 1.0 / std::sqrt(static_cast<double>(out.size() - 1));
  std::normal_distribution<double> normal(0.0, sd);
  out[0] = 0.0;
  double x = 0.0;
  for (std::size_t k = 1; k < out.size(); ++k) {
    x += normal(rng);
    out[k] = x;
  }
}

inline Path sample_standard_path(std::size_t n_steps, RandomSource& rng) {
  detail::require(n_steps >= 1, "sample_standard_path: n_steps must be positive");
  Path path;
  path.values.resize(n_steps + 1);
  fill_standard_path(path.values, rng);
  return path;
}

/// out[k] = in[k] - (in[n] - c) k / n, with out[n] set to c exactly.
inline void shift_to_close(std::span<const double> in, double c, std::span<double> out) {
  detail::require(in.size() >= 2 && out.size() == in.size(), "shift_to_close: size mismatch");
  const std::size_t n = in.size() - 1;
  const double tilt = in[n] - c;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = in[k] - tilt * (static_cast<double>(k) * inv_n);
  out[n] = c;
}

inline Path shift_to_close(const Path& path, double c) {
  Path out;
  out.values.resize(path.values.size());
  shift_to_close(path.values, c, out.values);
  return out;
}

/// Close, high, low and the argmax refined by the vertex of the parabola through
/// the grid maximum and its two neighbours. A maximum on the first or last grid
/// point is placed uniformly at random in the adjacent step, drawing from `rng`.
inline PathSummary summarize(std::span<const double> values, RandomSource& rng) {
  detail::require(values.size() >= 2, "summarize: path needs at least one step");
  const std::size_t n = values.size() - 1;
  const double dt = 1.0 / static_cast<double>(n);
  PathSummary s;
  s.close = values[n];
  std::size_t imax = 0;
  double hi = values[0], lo = values[0];
  for (std::size_t k = 1; k <= n; ++k) {
    const double v = values[k];
    if (v > hi) {
      hi = v;
      imax = k;
    }
    lo = std::min(lo, v);
  }
  s.high = hi;
  s.low = lo;
  s.argmax_grid_index = imax;
  if (imax == 0 || imax == n) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double offset = dt * (1.0 - unit(rng));  // in (0, dt]
    s.argmax = imax == 0 ? offset : std::min(1.0, 1.0 - dt + offset);
    return s;
  }
  const double left = values[imax - 1], mid = values[imax], right = values[imax + 1];
  const double curvature = left - 2.0 * mid + right;
  double shift = 0.0;
  if (curvature < 0.0) shift = std::clamp(dt * (left - right) / (2.0 * curvature), -dt, dt);
  s.argmax = static_cast<double>(imax) * dt + shift;
  return s;
}

inline PathSummary summarize(const Path& path, RandomSource& rng) { return summarize(path.values, rng); }

// ---------------------------------------------------------------------------
// Exact samplers.

/// Maximum of a Brownian bridge ending at c, from a unit exponential draw.
inline double bridge_max_from_exponential(double c, double e) {
  return 0.5 * c + 0.5 * std::sqrt(c * c + 2.0 * e);
}

inline double sample_bridge_max(double c, RandomSource& rng) {
  std::exponential_distribution<double> exp1(1.0);
  return bridge_max_from_exponential(c, exp1(rng));
}

struct ThetaMaxClose {
  double theta = 0.5;
  double m = 0.0;
  double b1 = 0.0;
};

/// (theta, max, B(1)) from a uniform u and two independent unit exponentials.
inline ThetaMaxClose theta_m_b1_from(double u, double e1, double e2) {
  ThetaMaxClose out;
  out.theta = 0.5 * (1.0 + std::cos(2.0 * kPi * u));
  out.m = std::sqrt(2.0 * out.theta * e1);
  out.b1 = out.m - std::sqrt(2.0 * (1.0 - out.theta) * e2);
  return out;
}

inline ThetaMaxClose sample_theta_m_b1(RandomSource& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> exp1(1.0);
  const double u = unit(rng);
  const double e1 = exp1(rng);
  const double e2 = exp1(rng);
  return theta_m_b1_from(u, e1, e2);
}

/// Meander pinned at c at time 1, evaluated at t: the norm of a three-dimensional
/// Brownian bridge from the origin to (c, 0, 0).
inline double meander_marginal_from(double t, double c, double normal, double e) {
  const double spread = t * (1.0 - t);
  const double along = c * t + std::sqrt(spread) * normal;
  return std::sqrt(along * along + 2.0 * e * spread);
}

inline double sample_meander_marginal(double t, double c, RandomSource& rng) {
  detail::require(t > 0.0 && t <= 1.0, "sample_meander_marginal: t must lie in (0,1]");
  detail::require(c >= 0.0, "sample_meander_marginal: c must be nonnegative");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::exponential_distribution<double> exp1(1.0);
  const double z = normal(rng);
  return meander_marginal_from(t, c, z, exp1(rng));
}

}  // namespace bmcond
