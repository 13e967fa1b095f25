#pragma once

// bmcond command line: curves, simulate, worst-fit, table.
// Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 numerical domain error.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "bmcond/errors.hpp"
#include "bmcond/estimator.hpp"
#include "bmcond/io/csv.hpp"
#include "bmcond/io/manifest.hpp"
#include "bmcond/io/svg.hpp"
#include "bmcond/moments.hpp"
#include "bmcond/simulation.hpp"
#include "bmcond/variance_table.hpp"

namespace bmcond::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDomain = 3;

class usage_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// "close,argmax,high", letter codes like "cah", or "none".
inline std::vector<Dimension> parse_dimensions(const std::string& text) {
  std::vector<Dimension> dims;
  auto add = [&](Dimension d) {
    if (std::find(dims.begin(), dims.end(), d) != dims.end())
      throw usage_error("conditioning set repeats '" + std::string(to_string(d)) + "'");
    dims.push_back(d);
  };
  if (text.empty() || text == "none") return dims;
  if (text.find(',') == std::string::npos && text.size() <= 4 &&
      text.find_first_not_of("cahl") == std::string::npos) {
    for (char ch : text) add(ch == 'c' ? Dimension::close : ch == 'a' ? Dimension::argmax
                             : ch == 'h' ? Dimension::high : Dimension::low);
    return dims;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    bool found = false;
    for (Dimension d : kAllDimensions)
      if (item == to_string(d)) add(d), found = true;
    if (!found) throw usage_error("unknown statistic '" + item + "' (close, argmax, high, low)");
  }
  return dims;
}

inline std::string dimensions_label(const std::vector<Dimension>& dims) {
  if (dims.empty()) return "none";
  std::string s;
  for (Dimension d : dims) s += (s.empty() ? "" : ",") + std::string(to_string(d));
  return s;
}

namespace detail {

struct SimFlags {
  std::uint64_t sims = 200000;
  std::size_t steps = 512;
  std::size_t bins = 20;
  std::uint64_t seed = 1;
  std::string given = "cah";
  std::vector<double> close_targets;
  std::size_t close_target_count = 0;
  std::size_t time_stride = 1;
  std::string edges = "empirical";
  std::size_t memory_cap_mb = 3072;
  std::string out_dir = ".";

  void add_to(CLI::App* app, bool with_given, bool with_out = true) {
    app->add_option("--sims", sims, "number of simulated paths")->check(CLI::PositiveNumber);
    app->add_option("--steps", steps, "time steps per path")->check(CLI::Range(2, 1 << 20));
    app->add_option("--bins", bins, "quantile bins per dimension")->check(CLI::Range(2, 100000));
    app->add_option("--seed", seed, "random seed");
    if (with_given) app->add_option("--given", given, "conditioning set, e.g. cah or close,argmax,high or none");
    app->add_option("--close-targets", close_targets, "shift every path to each of these close values")
        ->delimiter(',');
    app->add_option("--close-target-count", close_target_count,
                    "use this many close targets at normal midpoint quantiles");
    app->add_option("--time-stride", time_stride, "keep every k-th time point")->check(CLI::PositiveNumber);
    app->add_option("--edges", edges, "bin edges: empirical or analytic")
        ->check(CLI::IsMember({"empirical", "analytic"}));
    app->add_option("--memory-cap-mb", memory_cap_mb, "fail when bin stores would exceed this")
        ->check(CLI::PositiveNumber);
    if (with_out) app->add_option("--out", out_dir, "output directory");
  }

  [[nodiscard]] SimulationConfig config() const {
    if (!close_targets.empty() && close_target_count > 0)
      throw usage_error("--close-targets and --close-target-count are mutually exclusive");
    SimulationConfig cfg;
    cfg.n_sim = sims;
    cfg.n_steps = steps;
    cfg.n_bins = bins;
    cfg.seed = seed;
    cfg.close_targets = close_target_count > 0 ? normal_close_targets(close_target_count) : close_targets;
    cfg.time_stride = time_stride;
    cfg.edge_source = edges == "analytic" ? EdgeSource::analytic : EdgeSource::empirical;
    cfg.memory_cap_bytes = memory_cap_mb << 20;
    if (time_stride > steps) throw usage_error("--time-stride exceeds --steps");
    return cfg;
  }

  void echo(io::RunManifest& m, const std::string& command) const {
    m.set("command", command);
    m.set("sims", std::to_string(sims));
    m.set("steps", std::to_string(steps));
    m.set("bins", std::to_string(bins));
    m.set("seed", std::to_string(seed));
    m.set("given", given);
    std::string targets;
    for (double c : config().close_targets) targets += (targets.empty() ? "" : ",") + io::format_number(c);
    m.set("close_targets", targets);
    m.set("time_stride", std::to_string(time_stride));
    m.set("edges", edges);
    m.set("memory_cap_mb", std::to_string(memory_cap_mb));
  }
};

inline std::filesystem::path prepare_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << content;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

inline void write_manifest(const std::filesystem::path& dir, io::RunManifest& m,
                           std::chrono::steady_clock::time_point start) {
  m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream os;
  m.write(os);
  write_file(dir / "manifest.txt", os.str());
}

// ---------------------------------------------------------------------------

struct CurvesFlags {
  std::string given;
  std::optional<double> theta, high, close;
  std::size_t times = 101;
  std::string out;
};

inline void cmd_curves(const CurvesFlags& f, std::ostream& out) {
  auto need = [&](const std::optional<double>& v, const char* flag) {
    if (!v) throw usage_error(std::string("--given ") + f.given + " requires " + flag);
  };
  auto forbid = [&](const std::optional<double>& v, const char* flag) {
    if (v) throw usage_error(std::string("--given ") + f.given + " does not take " + flag);
  };
  std::ostringstream os;
  if (f.given == "th-table") {
    forbid(f.theta, "--theta");
    forbid(f.high, "--high");
    forbid(f.close, "--close");
    io::CsvWriter csv(os, {"conditioning", "var_analytic", "var_x6"});
    for (const auto& row : variance_table_rows()) {
      const auto v = analytic_time_avg_variance(analytic_family(row.dims));
      if (!v) continue;
      csv.field(row.name).number(*v).number(6.0 * *v).end_row();
    }
  } else {
    if (f.times < 2) throw usage_error("--times must be at least 2");
    std::function<MomentPair(double)> fn;
    if (f.given == "a") {
      need(f.theta, "--theta");
      forbid(f.high, "--high");
      forbid(f.close, "--close");
      fn = [&](double t) { return cond_moments_given_theta(t, *f.theta); };
    } else if (f.given == "ah") {
      need(f.theta, "--theta");
      need(f.high, "--high");
      forbid(f.close, "--close");
      fn = [&](double t) { return cond_moments_given_theta_h(t, *f.theta, *f.high); };
    } else if (f.given == "cah") {
      need(f.theta, "--theta");
      need(f.high, "--high");
      need(f.close, "--close");
      const ExtremaTriple p = ExtremaTriple::make(*f.theta, *f.high, *f.close);
      fn = [p](double t) { return cond_moments_given_c_theta_h(t, p); };
    } else {
      throw usage_error("--given must be one of a, ah, cah, th-table");
    }
    io::CsvWriter csv(os, {"t", "mean_analytic", "var_analytic"});
    for (double t : uniform_time_grid(f.times)) {
      const MomentPair m = fn(t);
      csv.number(t).number(m.mean).number(m.variance).end_row();
    }
  }
  if (f.out.empty()) {
    out << os.str();
  } else {
    write_file(f.out, os.str());
  }
}

inline void write_bins_csv(std::ostream& os, const StudyResult& st) {
  io::CsvWriter csv(os, {"bin_id", "close", "argmax", "high", "low", "n_paths", "t", "mean_sim", "var_sim",
                         "mean_analytic", "var_analytic"});
  const std::size_t per_store = st.bins_per_store();
  for (const BinView& bin : st.bins(2)) {
    std::optional<MomentCurve> analytic;
    if (st.family != AnalyticFamily::none) analytic = st.analytic_for(bin);
    const std::size_t id = bin.slab * per_store + bin.bin_id;
    for (std::size_t j = 0; j < bin.empirical.size(); ++j) {
      csv.integer(static_cast<long long>(id))
          .number(bin.params.close)
          .number(bin.params.argmax)
          .number(bin.params.high)
          .number(bin.params.low)
          .integer(static_cast<long long>(bin.count))
          .number(bin.empirical.times[j])
          .number(bin.empirical.means[j])
          .number(bin.empirical.variances[j]);
      if (analytic) {
        csv.number(analytic->means[j]).number(analytic->variances[j]);
      } else {
        csv.blank().blank();
      }
      csv.end_row();
    }
  }
}

inline void cmd_simulate(const SimFlags& f, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const SimulationConfig cfg = f.config();
  const StudySpec spec{f.given, parse_dimensions(f.given)};
  const SimulationResult res = run_simulation(cfg, spec);
  const auto dir = prepare_dir(f.out_dir);
  std::ostringstream os;
  write_bins_csv(os, res.studies.front());
  write_file(dir / "bins.csv", os.str());
  io::RunManifest m;
  f.echo(m, "simulate");
  m.outputs = {"bins.csv"};
  write_manifest(dir, m, start);
  out << "wrote " << (dir / "bins.csv").string() << '\n';
}

struct WorstFitFlags {
  SimFlags sim;
  std::vector<double> quantiles{5.0, 2.0, 1.0, 0.2};
  std::string compare = "representative";
  std::uint64_t min_count = 50;
};

inline void cmd_worst_fit(const WorstFitFlags& f, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  SimulationConfig cfg = f.sim.config();
  cfg.analytic_mixture = f.compare == "mixture";
  const StudySpec spec{f.sim.given, parse_dimensions(f.sim.given)};
  const auto family = analytic_family(spec.dims);
  if (family == AnalyticFamily::none && f.compare != "self")
    throw usage_error("conditioning set '" + f.sim.given + "' has no analytic curve; use --compare self");
  const SimulationResult res = run_simulation(cfg, spec);
  const StudyResult& st = res.studies.front();
  const auto bins = st.bins(2);

  AnalyticCurveFn reference;
  if (f.compare == "self") {
    reference = [](const BinView& b) { return b.empirical; };
  } else if (f.compare == "mixture") {
    reference = [&](const BinView& b) { return st.mixture_for(b); };
  } else {
    reference = [&](const BinView& b) { return st.analytic_for(b); };
  }
  const WorstFitReport report = mse_rank(bins, reference, f.quantiles, f.min_count);

  const auto dir = prepare_dir(f.sim.out_dir);
  const std::size_t per_store = st.bins_per_store();
  std::ostringstream csv_text;
  {
    io::CsvWriter csv(csv_text, {"ranking", "quantile_pct", "rank", "bin_id", "close", "argmax", "high", "low",
                                 "n_paths", "mse_mean", "mse_var"});
    for (int which = 0; which < 2; ++which) {
      for (std::size_t k = 0; k < report.marks.size(); ++k) {
        const FitEntry& e = which == 0 ? report.worst_mean_at(k) : report.worst_var_at(k);
        const std::size_t rank = which == 0 ? report.marks[k].by_mean_rank : report.marks[k].by_var_rank;
        csv.field(which == 0 ? "mean" : "variance")
            .number(report.marks[k].percent)
            .integer(static_cast<long long>(rank))
            .integer(static_cast<long long>(e.slab * per_store + e.bin_id))
            .number(e.params.close)
            .number(e.params.argmax)
            .number(e.params.high)
            .number(e.params.low)
            .integer(static_cast<long long>(e.count))
            .number(e.mse_mean)
            .number(e.mse_var)
            .end_row();
      }
    }
  }
  write_file(dir / "worst_fit.csv", csv_text.str());

  // One simulation/analytic pair per selected bin, in order of first selection.
  std::vector<std::pair<std::size_t, std::size_t>> chosen;
  for (std::size_t k = 0; k < report.marks.size(); ++k) {
    for (const FitEntry* e : {&report.worst_mean_at(k), &report.worst_var_at(k)}) {
      const std::pair key{e->slab, e->bin_id};
      if (std::find(chosen.begin(), chosen.end(), key) == chosen.end()) chosen.push_back(key);
    }
  }
  io::Panel mean_panel{"mean", {}}, var_panel{"variance", {}};
  std::size_t color = 0;
  for (const auto& [slab, id] : chosen) {
    const auto it = std::find_if(bins.begin(), bins.end(),
                                 [&](const BinView& b) { return b.slab == slab && b.bin_id == id; });
    const MomentCurve ref = reference(*it);
    const std::string c = io::kPalette[color++ % std::size(io::kPalette)];
    mean_panel.series.push_back({it->empirical.times, it->empirical.means, c, true});
    mean_panel.series.push_back({ref.times, ref.means, c, false});
    var_panel.series.push_back({it->empirical.times, it->empirical.variances, c, true});
    var_panel.series.push_back({ref.times, ref.variances, c, false});
  }
  std::ostringstream svg;
  io::write_svg(svg, {mean_panel, var_panel});
  write_file(dir / "worst_fit.svg", svg.str());

  io::RunManifest m;
  f.sim.echo(m, "worst-fit");
  std::string q;
  for (double v : f.quantiles) q += (q.empty() ? "" : ",") + io::format_number(v);
  m.set("quantiles", q);
  m.set("compare", f.compare);
  m.set("min_count", std::to_string(f.min_count));
  m.outputs = {"worst_fit.csv", "worst_fit.svg"};
  write_manifest(dir, m, start);
  out << "wrote " << (dir / "worst_fit.csv").string() << " and " << (dir / "worst_fit.svg").string() << '\n';
}

struct TableFlags {
  SimFlags sim;
  std::uint64_t min_count = 50;
  std::string out;  ///< optional CSV copy
};

struct TableRow {
  std::string name;
  VarianceSummary empirical;
  std::optional<double> analytic;
};

inline std::vector<TableRow> compute_variance_table(const SimulationConfig& cfg, std::uint64_t min_count) {
  const auto specs = variance_table_rows();
  const SimulationResult res = run_simulation(cfg, specs);
  std::vector<TableRow> rows;
  for (const auto& st : res.studies) {
    const auto bins = st.bins(2);
    rows.push_back({st.spec.name, time_avg_variance(bins, min_count), analytic_time_avg_variance(st.family)});
  }
  return rows;
}

inline void cmd_table(const TableFlags& f, std::ostream& out) {
  SimulationConfig cfg = f.sim.config();
  if (cfg.close_targets.empty()) cfg.close_targets = normal_close_targets(cfg.n_bins);
  const auto rows = compute_variance_table(cfg, f.min_count);

  out << std::left << std::setw(20) << "conditioning" << std::right << std::setw(12) << "var" << std::setw(12)
      << "var*6" << std::setw(12) << "analytic" << std::setw(8) << "bins" << std::setw(12) << "paths" << '\n';
  for (const auto& r : rows) {
    out << std::left << std::setw(20) << r.name << std::right << std::setw(12) << io::format_number(r.empirical.value, 5)
        << std::setw(12) << io::format_number(6.0 * r.empirical.value, 5) << std::setw(12)
        << (r.analytic ? io::format_number(*r.analytic, 5) : std::string("-")) << std::setw(8) << r.empirical.bins
        << std::setw(12) << r.empirical.paths << '\n';
  }
  if (!f.out.empty()) {
    std::ostringstream os;
    io::CsvWriter csv(os, {"conditioning", "var", "var_x6", "var_analytic", "bins", "paths"});
    for (const auto& r : rows) {
      csv.field(r.name).number(r.empirical.value).number(6.0 * r.empirical.value);
      if (r.analytic) {
        csv.number(*r.analytic);
      } else {
        csv.blank();
      }
      csv.integer(static_cast<long long>(r.empirical.bins)).integer(static_cast<long long>(r.empirical.paths)).end_row();
    }
    write_file(f.out, os.str());
  }
}

}  // namespace detail

/// Entry point shared by the executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Moments of Brownian motion conditioned on its maximum, argmax and close"};
  app.require_subcommand(1);

  detail::CurvesFlags curves;
  auto* c_curves = app.add_subcommand("curves", "analytic mean and variance curves");
  c_curves->add_option("--given", curves.given, "a | ah | cah | th-table")->required();
  c_curves->add_option("--theta", curves.theta, "time of the maximum");
  c_curves->add_option("--high", curves.high, "maximum");
  c_curves->add_option("--close", curves.close, "final value");
  c_curves->add_option("--times", curves.times, "number of time points");
  c_curves->add_option("--out", curves.out, "CSV file (default stdout)");

  detail::SimFlags simulate;
  auto* c_sim = app.add_subcommand("simulate", "simulate, bin and write per-bin curves");
  simulate.add_to(c_sim, true);

  detail::WorstFitFlags worst;
  auto* c_worst = app.add_subcommand("worst-fit", "rank bins by their fit to the analytic curves");
  worst.sim.add_to(c_worst, true);
  c_worst->add_option("--quantiles", worst.quantiles, "worst-fit marks in percent")->delimiter(',');
  c_worst->add_option("--compare", worst.compare, "representative | mixture | self")
      ->check(CLI::IsMember({"representative", "mixture", "self"}));
  c_worst->add_option("--min-count", worst.min_count, "minimum paths per ranked bin");

  detail::TableFlags table;
  auto* c_table = app.add_subcommand("table", "time-averaged variance for each conditioning set");
  table.sim.add_to(c_table, false, false);
  c_table->add_option("--min-count", table.min_count, "minimum paths per bin");
  c_table->add_option("--csv", table.out, "also write the table as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_curves->parsed()) detail::cmd_curves(curves, out);
    if (c_sim->parsed()) detail::cmd_simulate(simulate, out);
    if (c_worst->parsed()) detail::cmd_worst_fit(worst, out);
    if (c_table->parsed()) detail::cmd_table(table, out);
  } catch (const usage_error& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const bmcond::domain_error& e) {
    err << "domain error: " << e.what() << '\n';
    return kExitDomain;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace bmcond::cli
