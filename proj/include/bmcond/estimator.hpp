#pragma once

// Quantile binning of path statistics and streaming per-bin, per-time moments.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bmcond/errors.hpp"
#include "bmcond/moments.hpp"
#include "bmcond/sampler.hpp"
#include "bmcond/special.hpp"

namespace bmcond {

enum class Dimension { close, argmax, high, low };

inline constexpr std::array<Dimension, 4> kAllDimensions{Dimension::close, Dimension::argmax,
                                                          Dimension::high, Dimension::low};

inline std::string_view to_string(Dimension d) {
  switch (d) {
    case Dimension::close:
      return "close";
    case Dimension::argmax:
      return "argmax";
    case Dimension::high:
      return "high";
    case Dimension::low:
      return "low";
  }
  return "?";
}

inline double statistic(const PathSummary& s, Dimension d) {
  switch (d) {
    case Dimension::close:
      return s.close;
    case Dimension::argmax:
      return s.argmax;
    case Dimension::high:
      return s.high;
    case Dimension::low:
      return s.low;
  }
  return 0.0;
}

enum class EdgeSource { analytic, empirical };

/// Quantile of the unconditioned law of one statistic.
inline double analytic_quantile(Dimension d, double q) {
  detail::require(q > 0.0 && q < 1.0, "analytic_quantile: q must lie in (0,1)");
  switch (d) {
    case Dimension::close:
      return standard_normal_quantile(q);
    case Dimension::argmax: {
      const double r = std::sin(0.5 * kPi * q);  // inverse of (2/pi) asin(sqrt(theta))
      return r * r;
    }
    case Dimension::high:
      return standard_normal_quantile(0.5 * (1.0 + q));
    case Dimension::low:
      return -standard_normal_quantile(0.5 * (1.0 + (1.0 - q)));
  }
  return 0.0;
}

/// n_bins + 1 ascending edges, outermost at -inf and +inf. Empirical edges are the
/// order statistics at ranks k n / n_bins of `sample`.
inline std::vector<double> build_quantile_edges(Dimension d, std::size_t n_bins, EdgeSource source,
                                                std::span<const double> sample = {}) {
  detail::require(n_bins >= 2, "build_quantile_edges: need at least two bins");
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> edges(n_bins + 1);
  edges.front() = -inf;
  edges.back() = inf;
  if (source == EdgeSource::analytic) {
    for (std::size_t k = 1; k < n_bins; ++k)
      edges[k] = analytic_quantile(d, static_cast<double>(k) / static_cast<double>(n_bins));
    return edges;
  }
  if (sample.size() < 10 * n_bins)
    throw insufficient_data("build_quantile_edges: empirical edges need at least 10 samples per bin");
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t k = 1; k < n_bins; ++k) {
    const std::size_t rank = k * sorted.size() / n_bins;  // 1-based order statistic
    double e = sorted[rank - 1];
    if (e <= edges[k - 1]) e = std::nextafter(edges[k - 1], inf);
    edges[k] = e;
  }
  return edges;
}

/// Product grid of per-dimension quantile buckets. Bucket k of a dimension holds
/// edges[k] < v <= edges[k+1]; bin ids are mixed-radix with the first dimension slowest.
struct BinGrid {
  std::vector<Dimension> dimensions;
  std::vector<std::vector<double>> edges;

  static BinGrid make(std::vector<Dimension> dims, std::vector<std::vector<double>> edges) {
    detail::require(dims.size() == edges.size(), "BinGrid: one edge vector per dimension");
    for (const auto& e : edges) {
      detail::require(e.size() >= 3, "BinGrid: each dimension needs at least two bins");
      detail::require(std::isinf(e.front()) && e.front() < 0 && std::isinf(e.back()) && e.back() > 0,
                      "BinGrid: outermost edges must be -inf and +inf");
      for (std::size_t k = 1; k < e.size(); ++k)
        detail::require(e[k] > e[k - 1], "BinGrid: edges must be strictly increasing");
    }
    return BinGrid{std::move(dims), std::move(edges)};
  }

  /// Single bin: no conditioning.
  static BinGrid trivial() { return BinGrid{}; }

  [[nodiscard]] std::size_t bins_in(std::size_t dim) const { return edges[dim].size() - 1; }

  [[nodiscard]] std::size_t total_bins() const {
    std::size_t n = 1;
    for (std::size_t d = 0; d < dimensions.size(); ++d) n *= bins_in(d);
    return n;
  }

  [[nodiscard]] std::size_t bucket(std::size_t dim, double v) const {
    const auto& e = edges[dim];
    const auto it = std::lower_bound(e.begin() + 1, e.end() - 1, v);
    return static_cast<std::size_t>(it - (e.begin() + 1));
  }

  [[nodiscard]] std::size_t bin_of(const PathSummary& s) const {
    std::size_t id = 0;
    for (std::size_t d = 0; d < dimensions.size(); ++d)
      id = id * bins_in(d) + bucket(d, statistic(s, dimensions[d]));
    return id;
  }

  [[nodiscard]] std::vector<std::size_t> coordinates(std::size_t bin_id) const {
    std::vector<std::size_t> coords(dimensions.size());
    for (std::size_t d = dimensions.size(); d-- > 0;) {
      coords[d] = bin_id % bins_in(d);
      bin_id /= bins_in(d);
    }
    return coords;
  }
};

/// One-pass mean and sum of squared deviations per time point. Integer weights
/// add that many copies of an observation (used for Poisson bootstrap replicates).
class BinAccumulator {
 public:
  explicit BinAccumulator(std::size_t n_times = 0) : mean_(n_times, 0.0), m2_(n_times, 0.0) {}

  void add(std::span<const double> x, std::uint64_t weight = 1) {
    detail::require(x.size() == mean_.size(), "BinAccumulator: observation length mismatch");
    if (weight == 0) return;
    count_ += weight;
    const double w = static_cast<double>(weight);
    const double frac = w / static_cast<double>(count_);
    double* mean = mean_.data();
    double* m2 = m2_.data();
    const double* xs = x.data();
    for (std::size_t i = 0; i < mean_.size(); ++i) {
      const double delta = xs[i] - mean[i];
      mean[i] += delta * frac;
      m2[i] += w * delta * (xs[i] - mean[i]);
    }
  }

  void merge(const BinAccumulator& other) {
    if (other.count_ == 0) return;
    detail::require(other.mean_.size() == mean_.size(), "BinAccumulator: merge length mismatch");
    if (count_ == 0) {
      *this = other;
      return;
    }
    const double na = static_cast<double>(count_), nb = static_cast<double>(other.count_);
    const double n = na + nb;
    for (std::size_t i = 0; i < mean_.size(); ++i) {
      const double delta = other.mean_[i] - mean_[i];
      mean_[i] += delta * nb / n;
      m2_[i] += other.m2_[i] + delta * delta * na * nb / n;
    }
    count_ += other.count_;
  }

  [[nodiscard]] std::uint64_t count() const { return count_; }
  [[nodiscard]] std::size_t n_times() const { return mean_.size(); }
  [[nodiscard]] const std::vector<double>& mean() const { return mean_; }
  [[nodiscard]] const std::vector<double>& m2() const { return m2_; }

  /// Unbiased sample variance per time; needs count >= 2.
  [[nodiscard]] std::vector<double> variance() const {
    if (count_ < 2) throw insufficient_data("BinAccumulator: variance needs at least two observations");
    std::vector<double> v(m2_.size());
    const double denom = static_cast<double>(count_ - 1);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::max(0.0, m2_[i] / denom);
    return v;
  }

 private:
  std::uint64_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

/// Sample mean and unbiased sample variance of an accumulator along `times`.
inline MomentCurve empirical_curve(const BinAccumulator& acc, const std::vector<double>& times,
                                   std::string label = "simulation") {
  detail::require(times.size() == acc.n_times(), "empirical_curve: time grid length mismatch");
  if (acc.count() < 2) throw insufficient_data("empirical_curve: bin has fewer than two paths");
  MomentCurve curve;
  curve.times = times;
  curve.means = acc.mean();
  curve.variances = acc.variance();
  curve.label = std::move(label);
  return curve;
}

/// Trapezoid average of `values` over `times`.
inline double time_average(std::span<const double> times, std::span<const double> values) {
  detail::require(times.size() == values.size() && times.size() >= 2, "time_average: need matching grids");
  double area = 0.0;
  for (std::size_t i = 1; i < times.size(); ++i)
    area += 0.5 * (values[i] + values[i - 1]) * (times[i] - times[i - 1]);
  return area / (times.back() - times.front());
}

/// Count-weighted mean of the statistics of the paths in a bin.
struct BinParams {
  double close = 0.0;
  double argmax = 0.0;
  double high = 0.0;
  double low = 0.0;

  [[nodiscard]] double get(Dimension d) const {
    switch (d) {
      case Dimension::close:
        return close;
      case Dimension::argmax:
        return argmax;
      case Dimension::high:
        return high;
      case Dimension::low:
        return low;
    }
    return 0.0;
  }
};

struct StoreOptions {
  std::size_t bootstrap_replicates = 0;
  bool analytic_mixture = false;  ///< also average per-path analytic moments in each bin
  std::size_t memory_cap_bytes = std::size_t{3} << 30;
};

/// Everything a store keeps for one bin.
struct BinCell {
  BinAccumulator paths;
  std::array<double, 4> stat_sums{};  // close, argmax, high, low
  std::vector<double> analytic_mean_sum;
  std::vector<double> analytic_second_sum;
  std::vector<BinAccumulator> replicates;
};

/// Per-path quantities handed to BinStore::accumulate.
struct Observation {
  const PathSummary& summary;
  std::span<const double> values;               ///< path on the store's time grid
  std::span<const MomentPair> analytic = {};     ///< required when the store tracks the analytic mixture
  std::span<const std::uint32_t> weights = {};  ///< one bootstrap weight per replicate
};

/// Bins of one conditioning grid, each with streaming per-time moments.
class BinStore {
 public:
  BinStore(BinGrid grid, std::vector<double> times, StoreOptions options = {})
      : grid_(std::move(grid)), times_(std::move(times)), options_(options) {
    detail::require(times_.size() >= 2, "BinStore: need at least two time points");
    const std::size_t bins = grid_.total_bins();
    const std::size_t need = bytes_required(bins, times_.size(), options_);
    if (need > options_.memory_cap_bytes) {
      std::ostringstream msg;
      msg << "bin store of " << bins << " bins x " << times_.size() << " time points needs "
          << need / (1024 * 1024) << " MiB, above the cap of " << options_.memory_cap_bytes / (1024 * 1024)
          << " MiB";
      throw capacity_error(msg.str());
    }
    cells_.reserve(bins);
    for (std::size_t b = 0; b < bins; ++b) cells_.push_back(make_cell());
  }

  static std::size_t bytes_required(std::size_t bins, std::size_t n_times, const StoreOptions& o) {
    const std::size_t vectors = 2 + (o.analytic_mixture ? 2 : 0) + 2 * o.bootstrap_replicates;
    return bins * n_times * vectors * sizeof(double);
  }

  std::size_t accumulate(const Observation& obs) {
    const std::size_t id = grid_.bin_of(obs.summary);
    BinCell& cell = cells_[id];
    cell.paths.add(obs.values);
    cell.stat_sums[0] += obs.summary.close;
    cell.stat_sums[1] += obs.summary.argmax;
    cell.stat_sums[2] += obs.summary.high;
    cell.stat_sums[3] += obs.summary.low;
    if (options_.analytic_mixture) {
      detail::require(obs.analytic.size() == times_.size(), "BinStore: analytic moments missing");
      for (std::size_t i = 0; i < times_.size(); ++i) {
        const MomentPair& m = obs.analytic[i];
        cell.analytic_mean_sum[i] += m.mean;
        cell.analytic_second_sum[i] += m.variance + m.mean * m.mean;
      }
    }
    if (options_.bootstrap_replicates > 0) {
      detail::require(obs.weights.size() == options_.bootstrap_replicates, "BinStore: bootstrap weights missing");
      for (std::size_t r = 0; r < cell.replicates.size(); ++r) cell.replicates[r].add(obs.values, obs.weights[r]);
    }
    return id;
  }

  void merge(const BinStore& other) {
    detail::require(other.cells_.size() == cells_.size() && other.times_.size() == times_.size(),
                    "BinStore: merge of incompatible stores");
    for (std::size_t b = 0; b < cells_.size(); ++b) {
      BinCell& dst = cells_[b];
      const BinCell& src = other.cells_[b];
      dst.paths.merge(src.paths);
      for (std::size_t k = 0; k < 4; ++k) dst.stat_sums[k] += src.stat_sums[k];
      for (std::size_t i = 0; i < dst.analytic_mean_sum.size(); ++i) {
        dst.analytic_mean_sum[i] += src.analytic_mean_sum[i];
        dst.analytic_second_sum[i] += src.analytic_second_sum[i];
      }
      for (std::size_t r = 0; r < dst.replicates.size(); ++r) dst.replicates[r].merge(src.replicates[r]);
    }
  }

  [[nodiscard]] const BinGrid& grid() const { return grid_; }
  [[nodiscard]] const std::vector<double>& times() const { return times_; }
  [[nodiscard]] const StoreOptions& options() const { return options_; }
  [[nodiscard]] std::size_t size() const { return cells_.size(); }
  [[nodiscard]] const BinCell& cell(std::size_t id) const { return cells_[id]; }

  [[nodiscard]] std::uint64_t total_count() const {
    std::uint64_t n = 0;
    for (const auto& c : cells_) n += c.paths.count();
    return n;
  }

  [[nodiscard]] BinParams params(std::size_t id) const {
    const BinCell& c = cells_[id];
    const double n = static_cast<double>(std::max<std::uint64_t>(c.paths.count(), 1));
    return {c.stat_sums[0] / n, c.stat_sums[1] / n, c.stat_sums[2] / n, c.stat_sums[3] / n};
  }

  /// Moments of the mixture of per-path analytic laws in a bin: mean of the means,
  /// and mean variance plus the spread of the means.
  [[nodiscard]] MomentCurve mixture_curve(std::size_t id) const {
    detail::require(options_.analytic_mixture, "BinStore: analytic mixture not tracked");
    const BinCell& c = cells_[id];
    detail::require(c.paths.count() > 0, "BinStore: empty bin has no mixture curve");
    const double n = static_cast<double>(c.paths.count());
    MomentCurve curve;
    curve.times = times_;
    curve.label = "analytic";
    curve.means.resize(times_.size());
    curve.variances.resize(times_.size());
    for (std::size_t i = 0; i < times_.size(); ++i) {
      const double m = c.analytic_mean_sum[i] / n;
      curve.means[i] = m;
      curve.variances[i] = std::max(0.0, c.analytic_second_sum[i] / n - m * m);
    }
    return curve;
  }

 private:
  BinCell make_cell() const {
    BinCell cell;
    cell.paths = BinAccumulator(times_.size());
    if (options_.analytic_mixture) {
      cell.analytic_mean_sum.assign(times_.size(), 0.0);
      cell.analytic_second_sum.assign(times_.size(), 0.0);
    }
    cell.replicates.assign(options_.bootstrap_replicates, BinAccumulator(times_.size()));
    return cell;
  }

  BinGrid grid_;
  std::vector<double> times_;
  StoreOptions options_;
  std::vector<BinCell> cells_;
};

/// Free-function form of BinStore::accumulate; returns the bin id.
inline std::size_t accumulate(const PathSummary& summary, std::span<const double> values, BinStore& store) {
  return store.accumulate(Observation{summary, values});
}

// ---------------------------------------------------------------------------
// Ranking against analytic curves.

/// A populated bin with its empirical curve.
struct BinView {
  std::size_t slab = 0;  ///< index of the close target the bin belongs to, 0 when unshifted
  std::size_t bin_id = 0;
  BinParams params;
  std::uint64_t count = 0;
  MomentCurve empirical;
};

/// Bins of `store` with at least `min_count` paths (never fewer than two).
inline std::vector<BinView> populated_bins(const BinStore& store, std::uint64_t min_count = 2,
                                           std::size_t slab = 0) {
  std::vector<BinView> views;
  for (std::size_t b = 0; b < store.size(); ++b) {
    const auto& acc = store.cell(b).paths;
    if (acc.count() < std::max<std::uint64_t>(min_count, 2)) continue;
    views.push_back(BinView{slab, b, store.params(b), acc.count(), empirical_curve(acc, store.times())});
  }
  return views;
}

struct FitEntry {
  std::size_t slab = 0;
  std::size_t bin_id = 0;
  BinParams params;
  std::uint64_t count = 0;
  double mse_mean = 0.0;
  double mse_var = 0.0;
};

/// Entry at one worst-fit quantile mark, ranked separately for the mean and the variance.
struct QuantileMark {
  double percent = 0.0;
  std::size_t by_mean_rank = 0;
  std::size_t by_var_rank = 0;
};

struct WorstFitReport {
  std::vector<FitEntry> by_mean;  ///< descending mse_mean
  std::vector<FitEntry> by_var;   ///< descending mse_var
  std::vector<QuantileMark> marks;

  [[nodiscard]] const FitEntry& worst_mean_at(std::size_t mark) const { return by_mean[marks[mark].by_mean_rank]; }
  [[nodiscard]] const FitEntry& worst_var_at(std::size_t mark) const { return by_var[marks[mark].by_var_rank]; }
};

inline constexpr std::array<double, 4> kDefaultWorstMarks{5.0, 2.0, 1.0, 0.2};

using AnalyticCurveFn = std::function<MomentCurve(const BinView&)>;

/// Time-averaged squared gaps (mean, variance) between two curves on one grid.
inline std::pair<double, double> curve_mse(const MomentCurve& a, const MomentCurve& b) {
  detail::require(a.size() == b.size() && a.size() >= 2, "curve_mse: curves must share a grid");
  std::vector<double> dm(a.size()), dv(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    dm[i] = (a.means[i] - b.means[i]) * (a.means[i] - b.means[i]);
    dv[i] = (a.variances[i] - b.variances[i]) * (a.variances[i] - b.variances[i]);
  }
  return {time_average(a.times, dm), time_average(a.times, dv)};
}

/// Ranks bins from worst to best time-averaged MSE against `analytic`, separately
/// for the mean and the variance, and picks the bins at the worst-`marks` percent.
inline WorstFitReport mse_rank(std::span<const BinView> bins, const AnalyticCurveFn& analytic,
                               std::span<const double> marks_percent = kDefaultWorstMarks,
                               std::uint64_t min_count = 50) {
  WorstFitReport report;
  for (const BinView& bin : bins) {
    if (bin.count < min_count) continue;
    const MomentCurve reference = analytic(bin);
    const auto [mse_mean, mse_var] = curve_mse(bin.empirical, reference);
    report.by_mean.push_back(FitEntry{bin.slab, bin.bin_id, bin.params, bin.count, mse_mean, mse_var});
  }
  if (report.by_mean.empty()) throw insufficient_data("mse_rank: no bin reaches the minimum count");
  report.by_var = report.by_mean;
  std::stable_sort(report.by_mean.begin(), report.by_mean.end(),
                   [](const FitEntry& a, const FitEntry& b) { return a.mse_mean > b.mse_mean; });
  std::stable_sort(report.by_var.begin(), report.by_var.end(),
                   [](const FitEntry& a, const FitEntry& b) { return a.mse_var > b.mse_var; });
  const std::size_t n = report.by_mean.size();
  for (double pct : marks_percent) {
    detail::require(pct >= 0.0 && pct <= 100.0, "mse_rank: marks are percentages");
    const auto rank = std::min(n - 1, static_cast<std::size_t>(std::floor(pct / 100.0 * static_cast<double>(n))));
    report.marks.push_back(QuantileMark{pct, rank, rank});
  }
  return report;
}

/// Monte Carlo noise level of a bin's curves: average over bootstrap replicates of
/// the time-averaged squared gap between replicate and full-sample curves.
struct ErrorFloor {
  double mean = 0.0;
  double variance = 0.0;
};

inline ErrorFloor mc_error_floor(const BinCell& cell, const std::vector<double>& times) {
  detail::require(!cell.replicates.empty(), "mc_error_floor: store has no bootstrap replicates");
  const MomentCurve full = empirical_curve(cell.paths, times);
  ErrorFloor floor;
  std::size_t used = 0;
  for (const auto& rep : cell.replicates) {
    if (rep.count() < 2) continue;
    const auto [m, v] = curve_mse(empirical_curve(rep, times), full);
    floor.mean += m;
    floor.variance += v;
    ++used;
  }
  if (used == 0) throw insufficient_data("mc_error_floor: no usable bootstrap replicate");
  floor.mean /= static_cast<double>(used);
  floor.variance /= static_cast<double>(used);
  return floor;
}

/// Count-weighted average over bins of the time-averaged sample variance.
struct VarianceSummary {
  double value = 0.0;
  std::uint64_t paths = 0;
  std::size_t bins = 0;
};

inline VarianceSummary time_avg_variance(std::span<const BinView> bins, std::uint64_t min_count = 50) {
  VarianceSummary out;
  double weighted = 0.0;
  for (const BinView& b : bins) {
    if (b.count < min_count) continue;
    weighted += static_cast<double>(b.count) * time_average(b.empirical.times, b.empirical.variances);
    out.paths += b.count;
    ++out.bins;
  }
  if (out.bins == 0) throw insufficient_data("time_avg_variance: no bin reaches the minimum count");
  out.value = weighted / static_cast<double>(out.paths);
  return out;
}

}  // namespace bmcond
