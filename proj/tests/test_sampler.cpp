#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <numeric>

#include "bmcond/analytic_core.hpp"
#include "bmcond/estimator.hpp"
#include "bmcond/moments.hpp"
#include "bmcond/sampler.hpp"
#include "support.hpp"

using namespace bmcond;

namespace {

struct Moments {
  double mean = 0.0, var = 0.0;
};

Moments moments_of(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, ss / (n - 1.0)};
}

std::vector<PathSummary> summaries(std::size_t n_paths, std::size_t n_steps, std::uint64_t seed) {
  std::vector<PathSummary> out;
  out.reserve(n_paths);
  std::vector<double> path(n_steps + 1);
  for (std::size_t i = 0; i < n_paths; ++i) {
    RandomSource rng(seed, i);
    fill_standard_path(path, rng);
    RandomSource aux(seed + 1, i);
    out.push_back(summarize(path, aux));
  }
  return out;
}

/// Pearson statistic against equal-probability buckets from the analytic quantiles.
double chi_square(const std::vector<double>& xs, Dimension d, std::size_t buckets) {
  const auto edges = build_quantile_edges(d, buckets, EdgeSource::analytic);
  std::vector<double> counts(buckets, 0.0);
  for (double x : xs) {
    const auto it = std::lower_bound(edges.begin() + 1, edges.end() - 1, x);
    counts[static_cast<std::size_t>(it - edges.begin()) - 1] += 1.0;
  }
  const double expected = static_cast<double>(xs.size()) / static_cast<double>(buckets);
  double stat = 0.0;
  for (double c : counts) stat += (c - expected) * (c - expected) / expected;
  return stat;
}

double chi_square_critical(double alpha, std::size_t buckets) {
  return boost::math::quantile(boost::math::complement(boost::math::chi_squared(static_cast<double>(buckets - 1)), alpha));
}

}  // namespace

TEST(RandomSource, PhiloxKnownAnswer) {
  RandomSource rng(0, 0);
  EXPECT_EQ(rng(), 0xe169c58d6627e8d5ull);
}

TEST(RandomSource, StreamsAreReproducibleAndDistinct) {
  RandomSource a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  for (int i = 0; i < 10; ++i) {
    const auto x = a();
    EXPECT_EQ(x, b());
    EXPECT_NE(x, c());
    EXPECT_NE(x, d());
  }
}

TEST(StandardPath, StartsAtZeroAndIsDeterministic) {
  RandomSource r1(5, 3), r2(5, 3);
  const Path p = sample_standard_path(64, r1);
  const Path q = sample_standard_path(64, r2);
  ASSERT_EQ(p.values.size(), 65u);
  EXPECT_EQ(p.values[0], 0.0);
  EXPECT_EQ(p.values, q.values);
  EXPECT_DOUBLE_EQ(p.dt(), 1.0 / 64.0);
}

TEST(StandardPath, RejectsZeroSteps) {
  RandomSource rng(1, 0);
  EXPECT_THROW(sample_standard_path(0, rng), domain_error);
}

TEST(StandardPath, CloseHasUnitVariance) {
  std::vector<double> closes;
  std::vector<double> path(65);
  for (std::size_t i = 0; i < 100000; ++i) {
    RandomSource rng(11, i);
    fill_standard_path(path, rng);
    closes.push_back(path.back());
  }
  const Moments m = moments_of(closes);
  EXPECT_NEAR(m.var, 1.0, 0.02);
  EXPECT_NEAR(m.mean, 0.0, 0.01);
}

// The grid maximum understates the continuous one by about 0.5826/sqrt(n); the
// corrected mean must hit the half-normal mean and the raw mean must sit below it.
TEST(StandardPath, HighMatchesHalfNormalMeanUpToGridBias) {
  const std::size_t n_steps = 512;
  const auto s = summaries(100000, n_steps, 21);
  double total = 0.0;
  for (const auto& x : s) total += x.high;
  const double raw = total / static_cast<double>(s.size());
  const double half_normal_mean = std::sqrt(2.0 / M_PI);
  const double grid_bias = 0.5825971579390106 / std::sqrt(static_cast<double>(n_steps));
  EXPECT_NEAR(raw + grid_bias, half_normal_mean, 0.01);
  EXPECT_LT(raw, half_normal_mean);
}

TEST(ShiftToClose, EndsExactlyAtTarget) {
  RandomSource rng(3, 0);
  const Path p = sample_standard_path(100, rng);
  for (double c : {-1.5, 0.0, 0.3, 2.0}) {
    const Path q = shift_to_close(p, c);
    EXPECT_EQ(q.values.back(), c);
    EXPECT_EQ(q.values.front(), 0.0);
  }
}

TEST(ShiftToClose, IdentityAtOwnClose) {
  RandomSource rng(3, 1);
  const Path p = sample_standard_path(100, rng);
  EXPECT_EQ(shift_to_close(p, p.values.back()).values, p.values);
}

TEST(ShiftToClose, ComposesWithinRounding) {
  RandomSource rng(3, 2);
  const Path p = sample_standard_path(200, rng);
  const Path direct = shift_to_close(p, 0.7);
  const Path twice = shift_to_close(shift_to_close(p, -0.4), 0.7);
  for (std::size_t k = 0; k < p.values.size(); ++k) EXPECT_NEAR(direct.values[k], twice.values[k], 1e-14);
}

TEST(ShiftToClose, ShiftedPathHasBridgeCovariance) {
  // B(t) - t B(1) + t c has variance t(1-t) at every t regardless of c.
  std::vector<double> mid;
  std::vector<double> path(33), shifted(33);
  for (std::size_t i = 0; i < 50000; ++i) {
    RandomSource rng(8, i);
    fill_standard_path(path, rng);
    shift_to_close(path, 1.0, shifted);
    mid.push_back(shifted[8]);
  }
  const Moments m = moments_of(mid);
  EXPECT_NEAR(m.mean, 0.25, 0.01);
  EXPECT_NEAR(m.var, 0.25 * 0.75, 0.01 * 0.1875 * 3);
}

TEST(Summarize, IncreasingPathPutsArgmaxInLastCell) {
  std::vector<double> v(11);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = 0.1 * static_cast<double>(k);
  for (std::uint64_t i = 0; i < 20; ++i) {
    RandomSource rng(1, i);
    const PathSummary s = summarize(v, rng);
    EXPECT_GT(s.argmax, 0.9);
    EXPECT_LE(s.argmax, 1.0);
    EXPECT_EQ(s.argmax_grid_index, 10u);
    EXPECT_DOUBLE_EQ(s.high, 1.0);
  }
}

TEST(Summarize, DecreasingPathPutsArgmaxInFirstCell) {
  std::vector<double> v(11);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = -0.1 * static_cast<double>(k);
  RandomSource rng(1, 0);
  const PathSummary s = summarize(v, rng);
  EXPECT_GT(s.argmax, 0.0);
  EXPECT_LE(s.argmax, 0.1);
  EXPECT_EQ(s.high, 0.0);
  EXPECT_DOUBLE_EQ(s.low, -1.0);
}

TEST(Summarize, SymmetricTentKeepsGridArgmax) {
  std::vector<double> v{0.0, 0.5, 1.0, 0.5, 0.0};
  RandomSource rng(1, 0);
  const PathSummary s = summarize(v, rng);
  EXPECT_DOUBLE_EQ(s.argmax, 0.5);
  EXPECT_DOUBLE_EQ(s.high, 1.0);
}

TEST(Summarize, ParabolicOffset) {
  std::vector<double> v(11, -1.0);
  v[0] = 0.0;
  v[4] = 0.0;
  v[5] = 1.0;
  v[6] = 0.5;
  RandomSource rng(1, 0);
  const PathSummary s = summarize(v, rng);
  // vertex of the parabola through (-dt,0), (0,1), (dt,0.5) is dt/6 right of the grid point
  EXPECT_NEAR(s.argmax - 0.5, 0.1 / 6.0, 1e-12);
}

TEST(Summarize, PropertiesOnRandomPaths) {
  for (std::uint64_t i = 0; i < 200; ++i) {
    RandomSource rng(17, i);
    const Path p = sample_standard_path(50, rng);
    RandomSource aux(18, i);
    const PathSummary s = summarize(p, aux);
    const double dt = p.dt();
    EXPECT_LE(std::abs(s.argmax - static_cast<double>(s.argmax_grid_index) * dt), dt + 1e-15);
    EXPECT_GE(s.argmax, 0.0);
    EXPECT_LE(s.argmax, 1.0);
    EXPECT_GE(s.high, std::max(0.0, s.close));
    EXPECT_LE(s.low, std::min(0.0, s.close));
    // a shifted path is summarized afresh, never from a cached summary
    const Path q = shift_to_close(p, 0.0);
    RandomSource aux2(18, i);
    const PathSummary t = summarize(q, aux2);
    EXPECT_EQ(t.close, 0.0);
    EXPECT_GE(t.high, 0.0);
  }
}

TEST(BridgeMax, ClosedFormBoundaries) {
  EXPECT_DOUBLE_EQ(bridge_max_from_exponential(1.3, 0.0), 1.3);
  EXPECT_DOUBLE_EQ(bridge_max_from_exponential(-0.7, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(bridge_max_from_exponential(0.0, 2.0), 1.0);
  for (double e : {0.1, 1.0, 5.0}) EXPECT_GT(bridge_max_from_exponential(0.4, e), 0.4);
}

class BridgeMaxKs : public ::testing::TestWithParam<double> {};

TEST_P(BridgeMaxKs, MatchesQuadratureCdf) {
  const double c = GetParam();
  const std::size_t n = 100000;
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) {
    RandomSource rng(31, i);
    xs[i] = sample_bridge_max(c, rng);
  }
  const double phi_c = std::exp(-0.5 * c * c) / std::sqrt(2.0 * M_PI);
  const double lo = std::max(0.0, c);
  // cdf by quadrature of the joint density, evaluated on a grid and interpolated
  std::vector<double> grid, cdf;
  const double step = 0.005;
  double acc = 0.0, prev = lo;
  grid.push_back(lo);
  cdf.push_back(0.0);
  for (double h = lo + step; h < lo + 6.0; h += step) {
    acc += bmtest::quad([&](double x) { return density_h_c(x, c) / phi_c; }, prev, h, 1e-12);
    grid.push_back(h);
    cdf.push_back(acc);
    prev = h;
  }
  EXPECT_NEAR(cdf.back(), 1.0, 1e-8);
  const auto interp = [&](double h) {
    if (h <= lo) return 0.0;
    if (h >= grid.back()) return 1.0;
    const auto k = static_cast<std::size_t>((h - lo) / step);
    const double w = (h - grid[k]) / (grid[k + 1] - grid[k]);
    return (1.0 - w) * cdf[k] + w * cdf[k + 1];
  };
  EXPECT_LT(bmtest::ks_statistic(xs, interp), bmtest::ks_critical_1pct(n));
}

INSTANTIATE_TEST_SUITE_P(CloseValues, BridgeMaxKs, ::testing::Values(-1.0, 0.0, 1.0));

TEST(ThetaMaxClose, DeterministicMapBoundaries) {
  const auto a = theta_m_b1_from(0.0, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(a.theta, 1.0);
  EXPECT_DOUBLE_EQ(a.b1, a.m);
  const auto b = theta_m_b1_from(0.25, 0.5, 2.0);
  EXPECT_NEAR(b.theta, 0.5, 1e-15);
  EXPECT_NEAR(b.m, std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(b.b1, std::sqrt(0.5) - std::sqrt(2.0), 1e-15);
}

namespace {

std::vector<ThetaMaxClose> triples(std::size_t n, std::uint64_t seed) {
  std::vector<ThetaMaxClose> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    RandomSource rng(seed, i);
    out[i] = sample_theta_m_b1(rng);
  }
  return out;
}

}  // namespace

TEST(ThetaMaxClose, MarginalsMatchArcsineAndHalfNormal) {
  const std::size_t n = 100000;
  const auto s = triples(n, 41);
  std::vector<double> thetas, maxima;
  for (const auto& x : s) {
    thetas.push_back(x.theta);
    maxima.push_back(x.m);
    ASSERT_GE(x.m, std::max(0.0, x.b1));
  }
  const double crit = bmtest::ks_critical_1pct(n);
  EXPECT_LT(bmtest::ks_statistic(thetas, [](double t) { return 2.0 / M_PI * std::asin(std::sqrt(std::clamp(t, 0.0, 1.0))); }), crit);
  EXPECT_LT(bmtest::ks_statistic(maxima, [](double h) { return h <= 0.0 ? 0.0 : std::erf(h / std::sqrt(2.0)); }), crit);
}

// Deviations are taken about E[B(1) | theta] so the spread of the conditional mean
// inside a decile does not inflate the estimate.
TEST(ThetaMaxClose, CloseVarianceIsConstantAcrossThetaDeciles) {
  const auto s = triples(200000, 43);
  const double target = 2.0 - M_PI / 2.0;
  for (int d = 0; d < 10; ++d) {
    // decile boundaries of the arcsine law
    const double lo = std::pow(std::sin(M_PI / 2.0 * d / 10.0), 2);
    const double hi = std::pow(std::sin(M_PI / 2.0 * (d + 1) / 10.0), 2);
    double n = 0.0, ss = 0.0;
    for (const auto& x : s) {
      if (x.theta < lo || x.theta >= hi) continue;
      const double r = x.b1 - b1_moments_given_theta(std::clamp(x.theta, 1e-6, 1.0 - 1e-6)).mean;
      ss += r * r;
      n += 1.0;
    }
    ASSERT_GT(n, 15000.0);
    EXPECT_NEAR(ss / n, target, 0.03 * target) << "decile " << d;
  }
}

TEST(ThetaMaxClose, JointDensityAgreesOnACell) {
  // mass of the box theta in [0.3,0.5], m in [0.5,1.0] versus sampled frequency
  const auto s = triples(100000, 47);
  double hits = 0.0;
  for (const auto& x : s)
    if (x.theta >= 0.3 && x.theta < 0.5 && x.m >= 0.5 && x.m < 1.0) hits += 1.0;
  const double p = bmtest::quad([](double th) { return bmtest::quad([&](double h) { return density_theta_h(th, h); }, 0.5, 1.0); }, 0.3, 0.5);
  const double n = static_cast<double>(s.size());
  EXPECT_NEAR(hits / n, p, 4.0 * std::sqrt(p * (1.0 - p) / n));
}

TEST(MeanderMarginal, PinnedAtTimeOne) {
  EXPECT_DOUBLE_EQ(meander_marginal_from(1.0, 0.8, 0.0, 0.0), 0.8);
  EXPECT_DOUBLE_EQ(meander_marginal_from(1.0, 0.8, 1.7, 3.0), 0.8);
}

TEST(MeanderMarginal, RejectsBadArguments) {
  RandomSource rng(1, 0);
  EXPECT_THROW(sample_meander_marginal(0.0, 1.0, rng), domain_error);
  EXPECT_THROW(sample_meander_marginal(0.5, -0.1, rng), domain_error);
}

TEST(MeanderMarginal, MomentsMatchClosedForms) {
  const std::size_t n = 100000;
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) {
    RandomSource rng(53, i);
    xs[i] = sample_meander_marginal(0.5, 1.0, rng);
  }
  const double m1 = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
  double m2 = 0.0;
  for (double x : xs) m2 += x * x;
  m2 /= static_cast<double>(n);
  EXPECT_NEAR(m1, meander_m1(0.5, 1.0, 1.0), 0.01 * meander_m1(0.5, 1.0, 1.0));
  EXPECT_NEAR(m2, meander_m2(0.5, 1.0, 1.0), 0.01 * meander_m2(0.5, 1.0, 1.0));
}

TEST(PathHistograms, CloseMatchesNormal) {
  const std::size_t buckets = 20;
  const auto s = summaries(100000, 1024, 61);
  std::vector<double> closes;
  for (const auto& x : s) closes.push_back(x.close);
  EXPECT_LT(chi_square(closes, Dimension::close, buckets), chi_square_critical(0.01, buckets));
}

// The raw grid maximum is deliberately left uncorrected, so its histogram is
// checked after the leading-order shift and for convergence in the step count.
TEST(PathHistograms, HighMatchesHalfNormalUpToGridBias) {
  const std::size_t buckets = 20;
  const auto fine = summaries(100000, 1024, 61);
  const auto coarse = summaries(100000, 256, 61);
  const auto highs = [](const std::vector<PathSummary>& s, double shift) {
    std::vector<double> out;
    for (const auto& x : s) out.push_back(x.high + shift);
    return out;
  };
  const double beta = 0.5825971579390106;
  const double raw_fine = chi_square(highs(fine, 0.0), Dimension::high, buckets);
  const double raw_coarse = chi_square(highs(coarse, 0.0), Dimension::high, buckets);
  EXPECT_LT(raw_fine, raw_coarse);
  EXPECT_LT(chi_square(highs(fine, beta / std::sqrt(1024.0)), Dimension::high, buckets),
            chi_square_critical(0.01, buckets));
}

TEST(PathHistograms, ArgmaxMatchesArcsineAtFivePercent) {
  const std::size_t buckets = 20;
  const auto s = summaries(100000, 1024, 67);
  std::vector<double> argmaxes;
  for (const auto& x : s) argmaxes.push_back(x.argmax);
  EXPECT_LT(chi_square(argmaxes, Dimension::argmax, buckets), chi_square_critical(0.05, buckets));
}
