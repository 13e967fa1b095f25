#pragma once

// Two-pass Monte Carlo pipeline. Pass one draws every path, applies the close
// shifts and records summaries; bin edges come from those summaries. Pass two
// regenerates each path from its own stream and accumulates it into the bins.
// Work is cut into chunks whose size depends only on n_sim, and chunk stores are
// merged in chunk order, so results do not depend on the worker count.

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bmcond/errors.hpp"
#include "bmcond/estimator.hpp"
#include "bmcond/moments.hpp"
#include "bmcond/random.hpp"
#include "bmcond/sampler.hpp"
#include "bmcond/special.hpp"

namespace bmcond {

/// Conditioning set sharing the simulated paths with other studies.
struct StudySpec {
  std::string name;
  std::vector<Dimension> dims;

  [[nodiscard]] bool has(Dimension d) const { return std::find(dims.begin(), dims.end(), d) != dims.end(); }
};

struct SimulationConfig {
  std::uint64_t n_sim = 200000;
  std::size_t n_steps = 512;
  std::uint64_t seed = 1;
  std::size_t n_bins = 20;
  /// When non-empty, studies conditioning on close shift every path to each target
  /// instead of binning close.
  std::vector<double> close_targets;
  EdgeSource edge_source = EdgeSource::empirical;
  std::size_t time_stride = 1;  ///< keep every k-th grid time in the stores
  std::size_t bootstrap_replicates = 0;
  bool analytic_mixture = false;
  std::size_t memory_cap_bytes = std::size_t{3} << 30;
  std::size_t threads = 0;  ///< 0: BMCOND_THREADS, else hardware concurrency

  void validate() const {
    detail::require(n_sim >= 1, "SimulationConfig: n_sim must be positive");
    detail::require(n_steps >= 2, "SimulationConfig: n_steps must be at least 2");
    detail::require(n_bins >= 2, "SimulationConfig: n_bins must be at least 2");
    detail::require(time_stride >= 1 && time_stride <= n_steps, "SimulationConfig: bad time stride");
    for (double c : close_targets) detail::require(std::isfinite(c), "SimulationConfig: close targets must be finite");
  }
};

/// Close targets at the midpoint quantiles of N(0,1), one per equal-probability slice.
inline std::vector<double> normal_close_targets(std::size_t k) {
  detail::require(k >= 1, "normal_close_targets: need at least one target");
  std::vector<double> c(k);
  for (std::size_t i = 0; i < k; ++i)
    c[i] = standard_normal_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(k));
  return c;
}

inline std::size_t resolve_thread_count(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("BMCOND_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------------------
// Analytic references per conditioning set.

enum class AnalyticFamily { none, unconditional, close, argmax, argmax_high, close_argmax_high };

inline AnalyticFamily analytic_family(const std::vector<Dimension>& dims) {
  bool c = false, a = false, h = false, l = false;
  for (Dimension d : dims) {
    c |= d == Dimension::close;
    a |= d == Dimension::argmax;
    h |= d == Dimension::high;
    l |= d == Dimension::low;
  }
  if (l) return AnalyticFamily::none;
  if (!c && !a && !h) return AnalyticFamily::unconditional;
  if (c && !a && !h) return AnalyticFamily::close;
  if (!c && a && !h) return AnalyticFamily::argmax;
  if (!c && a && h) return AnalyticFamily::argmax_high;
  if (c && a && h) return AnalyticFamily::close_argmax_high;
  return AnalyticFamily::none;
}

/// Analytic moments at t for statistics measured on a discrete path. The argmax is
/// kept off the endpoints and the maximum at least max(0, close), which discrete
/// summaries can otherwise violate by rounding.
inline MomentPair analytic_moments(AnalyticFamily family, double t, double close, double argmax, double high) {
  constexpr double guard = 1e-6;
  const double theta = std::clamp(argmax, guard, 1.0 - guard);
  const double h = std::max({high, close, 0.0});
  switch (family) {
    case AnalyticFamily::unconditional:
      return unconditional_moments(t);
    case AnalyticFamily::close:
      return cond_moments_given_c(t, close);
    case AnalyticFamily::argmax:
      return cond_moments_given_theta(t, theta);
    case AnalyticFamily::argmax_high:
      return cond_moments_given_theta_h(t, theta, h);
    case AnalyticFamily::close_argmax_high:
      return cond_moments_given_c_theta_h(t, ExtremaTriple{theta, h, close});
    case AnalyticFamily::none:
      break;
  }
  detail::fail_domain("analytic_moments: conditioning set has no closed form");
}

/// Analytic curve at a bin's representative (count-weighted mean) parameters.
inline MomentCurve analytic_curve(AnalyticFamily family, const std::vector<double>& times, const BinParams& p) {
  MomentCurve curve;
  curve.times = times;
  curve.label = "analytic";
  curve.means.reserve(times.size());
  curve.variances.reserve(times.size());
  for (double t : times) {
    const MomentPair m = analytic_moments(family, t, p.close, p.argmax, p.high);
    curve.means.push_back(m.mean);
    curve.variances.push_back(m.variance);
  }
  return curve;
}

// ---------------------------------------------------------------------------

struct StudyResult {
  StudySpec spec;
  AnalyticFamily family = AnalyticFamily::none;
  bool uses_targets = false;
  std::vector<std::size_t> slab_ids;  ///< simulation slab behind each store
  std::vector<BinStore> stores;       ///< one per target, or a single unshifted store

  /// Populated bins across all stores; BinView::slab indexes `stores`.
  [[nodiscard]] std::vector<BinView> bins(std::uint64_t min_count = 2) const {
    std::vector<BinView> all;
    for (std::size_t k = 0; k < stores.size(); ++k) {
      auto part = populated_bins(stores[k], min_count, k);
      all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return all;
  }

  [[nodiscard]] MomentCurve analytic_for(const BinView& bin) const {
    return analytic_curve(family, stores[bin.slab].times(), bin.params);
  }

  [[nodiscard]] MomentCurve mixture_for(const BinView& bin) const { return stores[bin.slab].mixture_curve(bin.bin_id); }

  [[nodiscard]] std::size_t bins_per_store() const { return stores.empty() ? 0 : stores.front().size(); }
};

struct SimulationResult {
  SimulationConfig config;
  std::vector<double> times;
  std::vector<StudyResult> studies;
};

namespace detail {

inline constexpr std::uint64_t kSummarySeedOffset = 0x9E3779B97F4A7C15ull;
inline constexpr std::uint64_t kBootstrapSeedOffset = 0xD1B54A32D192ED03ull;

/// Slab 0 is the unshifted ensemble; slab k >= 1 is shifted to close_targets[k-1].
struct SlabLayout {
  bool raw_used = false;
  bool targets_used = false;
  std::size_t n_slabs = 0;
};

inline bool study_uses_targets(const StudySpec& s, const SimulationConfig& cfg) {
  return s.has(Dimension::close) && !cfg.close_targets.empty();
}

inline std::vector<Dimension> binned_dims(const StudySpec& s, bool uses_targets) {
  std::vector<Dimension> dims;
  for (Dimension d : s.dims)
    if (!(uses_targets && d == Dimension::close)) dims.push_back(d);
  return dims;
}

/// Runs fn(chunk_index) for chunks 0..n_chunks-1 on `threads` workers; commit(chunk)
/// is then called strictly in chunk order. The first exception is rethrown.
template <class Work, class Commit>
void run_chunks(std::size_t n_chunks, std::size_t threads, Work&& work, Commit&& commit) {
  threads = std::max<std::size_t>(1, std::min(threads, n_chunks));
  if (threads == 1) {
    for (std::size_t k = 0; k < n_chunks; ++k) commit(k, work(k));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::condition_variable cv;
  std::size_t next_commit = 0;
  std::exception_ptr failure;
  std::atomic<bool> abort{false};
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= n_chunks || abort) return;
      try {
        auto local = work(k);
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return next_commit == k || abort; });
        if (abort) return;
        commit(k, std::move(local));
        ++next_commit;
        cv.notify_all();
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        abort = true;
        cv.notify_all();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline std::size_t chunk_size_for(std::uint64_t n_sim) {
  return static_cast<std::size_t>(std::max<std::uint64_t>(1024, (n_sim + 31) / 32));
}

}  // namespace detail

/// Simulates cfg.n_sim paths once and accumulates them for every study.
inline SimulationResult run_simulation(const SimulationConfig& cfg, const std::vector<StudySpec>& specs) {
  cfg.validate();
  detail::require(!specs.empty(), "run_simulation: no study requested");
  const std::size_t threads = resolve_thread_count(cfg.threads);
  const std::size_t n = cfg.n_steps;
  const std::size_t n_targets = cfg.close_targets.size();

  detail::SlabLayout layout;
  layout.n_slabs = 1 + n_targets;
  for (const auto& s : specs) (detail::study_uses_targets(s, cfg) ? layout.targets_used : layout.raw_used) = true;

  SimulationResult result;
  result.config = cfg;
  for (std::size_t k = 0; k <= n; k += cfg.time_stride) result.times.push_back(static_cast<double>(k) / n);
  if (result.times.back() != 1.0) result.times.push_back(1.0);
  std::vector<std::size_t> time_index;
  for (double t : result.times) time_index.push_back(static_cast<std::size_t>(std::llround(t * n)));
  const std::size_t n_times = result.times.size();

  // Capacity check before any work: the merged stores plus one chunk store per worker.
  std::size_t store_bytes = 0;
  std::vector<std::size_t> study_bins;
  for (const auto& s : specs) {
    const bool targets = detail::study_uses_targets(s, cfg);
    std::size_t bins = 1;
    for (std::size_t d = 0; d < detail::binned_dims(s, targets).size(); ++d) bins *= cfg.n_bins;
    bins *= targets ? n_targets : 1;
    study_bins.push_back(bins);
    StoreOptions o;
    o.bootstrap_replicates = cfg.bootstrap_replicates;
    o.analytic_mixture = cfg.analytic_mixture;
    store_bytes += BinStore::bytes_required(bins, n_times, o);
  }
  const std::size_t total_bytes = store_bytes * (1 + threads);
  if (total_bytes > cfg.memory_cap_bytes) {
    std::size_t bins = 0;
    for (auto b : study_bins) bins += b;
    std::ostringstream msg;
    msg << "simulation needs " << bins << " bins x " << n_times << " time points (" << total_bytes / (1024 * 1024)
        << " MiB with " << threads << " worker(s)), above the cap of " << cfg.memory_cap_bytes / (1024 * 1024)
        << " MiB";
    throw capacity_error(msg.str());
  }

  // Pass 1: summaries per slab.
  const std::uint64_t n_sim = cfg.n_sim;
  std::vector<std::vector<PathSummary>> summaries(layout.n_slabs);
  if (layout.raw_used) summaries[0].resize(n_sim);
  if (layout.targets_used)
    for (std::size_t k = 1; k < layout.n_slabs; ++k) summaries[k].resize(n_sim);

  const std::size_t chunk = detail::chunk_size_for(n_sim);
  const std::size_t n_chunks = static_cast<std::size_t>((n_sim + chunk - 1) / chunk);
  auto chunk_range = [&](std::size_t k) {
    const std::uint64_t lo = static_cast<std::uint64_t>(k) * chunk;
    return std::pair{lo, std::min<std::uint64_t>(n_sim, lo + chunk)};
  };

  detail::run_chunks(
      n_chunks, threads,
      [&](std::size_t k) {
        std::vector<double> path(n + 1), shifted(n + 1);
        const auto [lo, hi] = chunk_range(k);
        for (std::uint64_t i = lo; i < hi; ++i) {
          RandomSource rng(cfg.seed, i);
          fill_standard_path(path, rng);
          RandomSource srng(cfg.seed + detail::kSummarySeedOffset, i);
          if (layout.raw_used) summaries[0][i] = summarize(path, srng);
          if (layout.targets_used) {
            for (std::size_t s = 1; s < layout.n_slabs; ++s) {
              shift_to_close(path, cfg.close_targets[s - 1], shifted);
              summaries[s][i] = summarize(shifted, srng);
            }
          }
        }
        return 0;
      },
      [](std::size_t, int) {});

  // Bin grids per study and slab.
  std::vector<StudyResult>& studies = result.studies;
  for (std::size_t q = 0; q < specs.size(); ++q) {
    StudyResult st;
    st.spec = specs[q];
    st.family = analytic_family(specs[q].dims);
    st.uses_targets = detail::study_uses_targets(specs[q], cfg);
    const auto dims = detail::binned_dims(specs[q], st.uses_targets);
    StoreOptions opts;
    opts.bootstrap_replicates = cfg.bootstrap_replicates;
    opts.analytic_mixture = cfg.analytic_mixture && st.family != AnalyticFamily::none;
    opts.memory_cap_bytes = std::numeric_limits<std::size_t>::max();
    if (st.uses_targets) {
      for (std::size_t s = 1; s < layout.n_slabs; ++s) st.slab_ids.push_back(s);
    } else {
      st.slab_ids.push_back(0);
    }
    for (std::size_t slab : st.slab_ids) {
      std::vector<std::vector<double>> edges;
      std::vector<double> sample(dims.empty() ? 0 : n_sim);
      for (Dimension d : dims) {
        if (cfg.edge_source == EdgeSource::empirical)
          for (std::uint64_t i = 0; i < n_sim; ++i) sample[i] = statistic(summaries[slab][i], d);
        edges.push_back(build_quantile_edges(d, cfg.n_bins, cfg.edge_source, sample));
      }
      st.stores.emplace_back(BinGrid::make(dims, std::move(edges)), result.times, opts);
    }
    studies.push_back(std::move(st));
  }

  // Pass 2: regenerate and accumulate.
  auto empty_copy = [&] {
    std::vector<std::vector<BinStore>> local;
    for (const auto& st : studies) {
      std::vector<BinStore> per;
      for (const auto& store : st.stores) per.emplace_back(store.grid(), store.times(), store.options());
      local.push_back(std::move(per));
    }
    return local;
  };

  detail::run_chunks(
      n_chunks, threads,
      [&](std::size_t k) {
        auto local = empty_copy();
        std::vector<double> path(n + 1), shifted(n + 1), values(n_times);
        std::vector<MomentPair> analytic(n_times);
        std::vector<std::uint32_t> weights(cfg.bootstrap_replicates);
        const auto [lo, hi] = chunk_range(k);
        for (std::uint64_t i = lo; i < hi; ++i) {
          RandomSource rng(cfg.seed, i);
          fill_standard_path(path, rng);
          if (!weights.empty()) {
            RandomSource brng(cfg.seed + detail::kBootstrapSeedOffset, i);
            std::poisson_distribution<std::uint32_t> poisson(1.0);
            for (auto& w : weights) w = poisson(brng);
          }
          for (std::size_t slab = 0; slab < layout.n_slabs; ++slab) {
            const bool needed = slab == 0 ? layout.raw_used : layout.targets_used;
            if (!needed) continue;
            const double* src = path.data();
            if (slab > 0) {
              shift_to_close(path, cfg.close_targets[slab - 1], shifted);
              src = shifted.data();
            }
            for (std::size_t j = 0; j < n_times; ++j) values[j] = src[time_index[j]];
            const PathSummary& summary = summaries[slab][i];
            for (std::size_t q = 0; q < studies.size(); ++q) {
              const StudyResult& st = studies[q];
              const auto pos = std::find(st.slab_ids.begin(), st.slab_ids.end(), slab);
              if (pos == st.slab_ids.end()) continue;
              BinStore& store = local[q][static_cast<std::size_t>(pos - st.slab_ids.begin())];
              Observation obs{summary, values};
              if (store.options().analytic_mixture) {
                for (std::size_t j = 0; j < n_times; ++j)
                  analytic[j] = analytic_moments(st.family, result.times[j], summary.close, summary.argmax,
                                                 summary.high);
                obs.analytic = analytic;
              }
              obs.weights = weights;
              store.accumulate(obs);
            }
          }
        }
        return local;
      },
      [&](std::size_t, std::vector<std::vector<BinStore>> local) {
        for (std::size_t q = 0; q < studies.size(); ++q)
          for (std::size_t s = 0; s < studies[q].stores.size(); ++s) studies[q].stores[s].merge(local[q][s]);
      });

  return result;
}

inline SimulationResult run_simulation(const SimulationConfig& cfg, const StudySpec& spec) {
  return run_simulation(cfg, std::vector<StudySpec>{spec});
}

}  // namespace bmcond
