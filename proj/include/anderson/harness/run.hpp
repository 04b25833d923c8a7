#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "json.hpp"

#include "anderson/disorder.hpp"
#include "anderson/eigensolve.hpp"
#include "anderson/errors.hpp"
#include "anderson/hamiltonian.hpp"
#include "anderson/harness/cache.hpp"
#include "anderson/harness/checksum.hpp"
#include "anderson/harness/config.hpp"
#include "anderson/harness/parallel.hpp"
#include "anderson/ids.hpp"
#include "anderson/localization.hpp"
#include "anderson/multiscale.hpp"
#include "anderson/pointprocess.hpp"
#include "anderson/statistics.hpp"
#include "anderson/version.hpp"

namespace anderson::harness {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct RunOptions {
  unsigned threads = default_threads();
  /// Overrides the config's output.dir when non-empty.
  fs::path out;
  /// Falls back to $ANDERSON_SPECTRA_CACHE, then to <out>/cache.
  std::optional<fs::path> cache;
  /// Ignore cached spectra (they are recomputed and overwritten).
  bool force = false;
  std::ostream* log = nullptr;
  /// Called with (stage, realization) for every spectrum a stage reads.
  std::function<void(std::string_view, std::uint64_t)> on_read;
};

struct FileEntry {
  std::string name;
  std::uint64_t checksum = 0;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  fs::path directory;
  std::string config_hash;
  std::string code_version;
  std::vector<std::pair<std::string, double>> timings;
  std::vector<FileEntry> files;
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;
};

enum class PlotKind { Spacing, Laplace, Wegner, Counts };

inline std::string_view plot_name(PlotKind k) {
  switch (k) {
    case PlotKind::Spacing: return "spacing";
    case PlotKind::Laplace: return "laplace";
    case PlotKind::Wegner: return "wegner";
    case PlotKind::Counts: return "counts";
  }
  return "unknown";
}

namespace detail {

inline std::string num(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  return anderson::detail::format_real(v);
}

/// JSON-safe number: non-finite values become null.
inline Json jnum(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

class Csv {
 public:
  explicit Csv(std::string header) { text_ = std::move(header) + "\n"; }
  template <class... T>
  void row(const T&... cells) {
    std::size_t i = 0;
    ((text_ += (i++ ? "," : "") + cell(cells)), ...);
    text_ += "\n";
  }
  [[nodiscard]] const std::string& text() const noexcept { return text_; }

 private:
  template <class T>
  static std::string cell(const T& v) {
    if constexpr (std::is_floating_point_v<T>) {
      return num(v);
    } else if constexpr (std::is_integral_v<T>) {
      return std::to_string(v);
    } else {
      return std::string(v);
    }
  }
  std::string text_;
};

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline Interval resolve_window(const WindowSpec& w, const IdsModel& ids, const BoxGeometry& geom) {
  switch (w.kind) {
    case WindowSpec::Kind::Explicit: return {w.a, w.b};
    case WindowSpec::Kind::MassCentered: return mass_centered_window(ids, w.e0, w.mass);
    case WindowSpec::Kind::Shrinking: return shrinking_window(w.e0, ids, geom, w.rho_tilde, w.delta, w.threshold);
    case WindowSpec::Kind::None: break;
  }
  throw ConfigError("window.kind: no window configured", 0, "window.kind");
}

/// Spectrum of `spectrum`'s operator with eigenvectors for the eigenvalues
/// in `window` (inverse iteration when tridiagonal, dense otherwise).
inline Spectrum with_window_vectors(const Hamiltonian& h, const Spectrum& spectrum, Interval window,
                                    const EigenOptions& opts = {}) {
  if (h.is_tridiagonal()) {
    Spectrum s = spectrum;
    const auto [first, last] = index_range(s, window);
    tridiagonal_eigenvectors(h, s, first, last);
    return s;
  }
  Spectrum s = eigen_full(h, true, opts);
  s.realization_index = spectrum.realization_index;
  return s;
}

}  // namespace detail

/// Eigenvalues of realizations 0..R-1, from the cache when possible.
inline std::vector<Spectrum> solve_ensemble(const DisorderModel& model, const BoxGeometry& geom, std::size_t count,
                                            unsigned threads, const SpectraCache* cache, std::uint64_t key,
                                            bool force, std::size_t* hits = nullptr,
                                            std::size_t* misses = nullptr) {
  std::vector<Spectrum> out(count, Spectrum{geom, 0, {}, {}, {}});
  std::vector<unsigned char> hit(count, 0);
  parallel_for(count, threads, [&](std::size_t k) {
    try {
      out[k].realization_index = k;
      if (cache && !force) {
        if (auto values = cache->load(key, k, geom.site_count())) {
          out[k].eigenvalues = std::move(*values);
          hit[k] = 1;
          return;
        }
      }
      const Hamiltonian h = sample_hamiltonian(model, geom, k);
      Spectrum s = solve(h, false);
      s.realization_index = k;
      out[k] = std::move(s);
      if (cache) cache->store(key, k, out[k].eigenvalues);
    } catch (const std::exception& e) {
      throw StageError("solve", static_cast<long>(k), e.what());
    }
  });
  const auto h = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
  if (hits) *hits += h;
  if (misses) *misses += count - h;
  return out;
}

inline std::vector<Spectrum> select_parity(const std::vector<Spectrum>& all, int parity) {
  std::vector<Spectrum> out;
  for (const auto& s : all) {
    if (static_cast<int>(s.realization_index % 2) == parity) out.push_back(s);
  }
  return out;
}

namespace detail {

struct Context {
  const ExperimentConfig& cfg;
  const RunOptions& opts;
  DisorderModel model;
  BoxGeometry geom;
  const SpectraCache* cache;
  RunManifest& manifest;
  fs::path dir;

  void touched(std::string_view stage, const std::vector<Spectrum>& spectra) const {
    if (!opts.on_read) return;
    for (const auto& s : spectra) opts.on_read(stage, s.realization_index);
  }
  void log(const std::string& line) const {
    if (opts.log) *opts.log << line << '\n';
  }
};

struct FittedEnsemble {
  std::vector<Spectrum> even;
  std::vector<Spectrum> odd;
  std::shared_ptr<const IdsModel> ids;
  Interval window;
};

inline FittedEnsemble fit_and_split(const Context& ctx, std::vector<Spectrum> all, const BoxGeometry& geom) {
  FittedEnsemble f;
  for (auto& s : all) (s.realization_index % 2 == 0 ? f.even : f.odd).push_back(std::move(s));
  if (f.even.empty()) throw StageError("ids", -1, "no even realization to fit the IDS on");
  ctx.touched("ids", f.even);
  f.ids = std::make_shared<const IdsModel>(fit_ids(f.even, ctx.cfg.bandwidth));
  if (ctx.cfg.window.kind != WindowSpec::Kind::None) f.window = resolve_window(ctx.cfg.window, *f.ids, geom);
  return f;
}

inline Json spacing_stage(const Context& ctx, const FittedEnsemble& f) {
  ctx.touched("spacing", f.odd);
  const auto map = unfold(f.ids, f.window);
  std::vector<SpacingSample> unfolded;
  std::vector<SpacingSample> scaled;
  for (const auto& s : f.odd) {
    if (auto x = unfolded_spacings(s, map, SpacingScale::Unfolded)) unfolded.push_back(std::move(*x));
    if (auto x = unfolded_spacings(s, map, SpacingScale::MeanDensity)) scaled.push_back(std::move(*x));
  }
  Json j;
  if (unfolded.empty()) {
    j["spacings"] = 0;
    return j;
  }
  const auto pooled = pooled_spacings(unfolded);
  const auto exp_cdf = [](double x) { return x <= 0.0 ? 0.0 : -std::expm1(-x); };
  double mean = 0.0;
  for (double x : pooled) mean += x;
  mean /= static_cast<double>(pooled.size());
  const double one[1] = {1.0};
  std::vector<double> xs;
  for (int i = 0; i <= 80; ++i) xs.push_back(0.05 * i);
  const auto empirical = dls(scaled, xs);
  const auto theory = g_nu_J(map, xs);
  double sup_g = 0.0;
  double sup_exp = 0.0;
  Json curve = Json::array();
  Csv csv("x,DLS_empirical,DLS_theory");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sup_g = std::max(sup_g, std::abs(empirical[i] - theory[i]));
    sup_exp = std::max(sup_exp, std::abs(empirical[i] - std::exp(-xs[i])));
    csv.row(xs[i], empirical[i], theory[i]);
    curve.push_back({xs[i], empirical[i], std::exp(-xs[i]), theory[i]});
  }
  write_text(ctx.dir / "dls.csv", csv.text());
  j["spacings"] = pooled.size();
  j["mean_unfolded_spacing"] = mean;
  j["ks_unfolded_vs_exp"] = ks_statistic(pooled, exp_cdf);
  j["dls_unfolded_at_1"] = dls(unfolded, one).front();
  j["sup_dls_vs_g_nu_J"] = sup_g;
  j["sup_dls_vs_exp"] = sup_exp;
  j["curve"] = std::move(curve);
  return j;
}

inline Json laplace_stage(const Context& ctx, const FittedEnsemble& main) {
  std::set<int> sizes(ctx.cfg.laplace_sizes.begin(), ctx.cfg.laplace_sizes.end());
  sizes.insert(ctx.cfg.half_side);
  std::vector<TestFunction> functions;
  for (const auto& s : ctx.cfg.test_functions) functions.push_back(parse_test_function(s));
  const auto grid = t_grid(ctx.cfg.t_grid);
  Json rows = Json::array();
  for (int size : sizes) {
    const BoxGeometry geom(ctx.cfg.dimension, size, ctx.cfg.boundary);
    FittedEnsemble other;
    const FittedEnsemble* f = &main;
    if (size != ctx.cfg.half_side) {
      auto all = solve_ensemble(ctx.model, geom, ctx.cfg.realizations, ctx.opts.threads, ctx.cache,
                                ctx.cfg.spectra_key() ^ fnv1a("L=" + std::to_string(size)), ctx.opts.force,
                                &ctx.manifest.cache_hits, &ctx.manifest.cache_misses);
      other = fit_and_split(ctx, std::move(all), geom);
      f = &other;
    }
    ctx.touched("laplace", f->odd);
    const auto map = unfold(f->ids, f->window);
    for (const auto& fn : functions) {
      std::vector<double> per(f->odd.size());
      parallel_for(f->odd.size(), ctx.opts.threads,
                   [&](std::size_t i) { per[i] = laplace_functional(f->odd[i], map, fn, grid); });
      double acc = 0.0;
      for (double v : per) acc += v;
      const double estimate = f->odd.empty() ? std::nan("") : acc / static_cast<double>(per.size());
      const double limit = poisson_limit(fn);
      rows.push_back({{"L", size},
                      {"function", fn.to_spec()},
                      {"empirical", jnum(estimate)},
                      {"poisson_limit", limit},
                      {"error", jnum(estimate - limit)}});
    }
    if (size == ctx.cfg.half_side && !f->odd.empty()) {
      Csv csv("realization,t,point");
      const auto& s = f->odd.front();
      const std::size_t stride = std::max<std::size_t>(1, (grid.size() - 1) / 10);
      for (std::size_t i = 0; i < grid.size(); i += stride) {
        for (double p : xi_J(s, map, grid[i]).points) csv.row(static_cast<std::size_t>(s.realization_index), grid[i], p);
      }
      write_text(ctx.dir / "points.csv", csv.text());
    }
  }
  return {{"t_grid", ctx.cfg.t_grid}, {"rows", std::move(rows)}};
}

inline Json wegner_stage(const Context& ctx, const FittedEnsemble& f) {
  ctx.touched("wegner", f.odd);
  std::vector<double> widths = ctx.cfg.wegner_widths;
  if (widths.empty()) {
    for (int i = 0; i <= 4; ++i) widths.push_back(0.5 * f.window.length() * std::pow(10.0, -0.25 * i));
    std::reverse(widths.begin(), widths.end());
  }
  ScanOptions so;
  so.placements = ctx.cfg.wegner_placements;
  so.bootstrap_resamples = ctx.cfg.bootstrap_resamples;
  so.seed = ctx.cfg.seed;
  const auto rep = wegner_minami_scan(f.odd, f.window, widths, so);
  Csv csv("width,abscissa,first_moment,second_factorial_moment");
  Json pts = Json::array();
  for (std::size_t i = 0; i < widths.size(); ++i) {
    csv.row(rep.widths[i], rep.abscissae[i], rep.first_moments[i], rep.second_factorial_moments[i]);
    pts.push_back({rep.widths[i], rep.first_moments[i], rep.second_factorial_moments[i]});
  }
  write_text(ctx.dir / "wegner.csv", csv.text());
  return {{"wegner_slope", jnum(rep.wegner_slope.value)},
          {"wegner_slope_ci", rep.wegner_slope.half_width},
          {"minami_slope", jnum(rep.minami_slope.value)},
          {"minami_slope_ci", rep.minami_slope.half_width},
          {"points", std::move(pts)}};
}

inline Json counts_stage(const Context& ctx, const FittedEnsemble& f) {
  ctx.touched("counts", f.odd);
  std::vector<Interval> windows;
  const double c = f.window.center();
  for (double frac : {1.0, 0.5, 0.25, 0.125}) {
    const double half = 0.5 * frac * f.window.length();
    windows.push_back({c - half, c + half});
  }
  const auto res = count_fluctuations(f.odd, *f.ids, windows, ctx.cfg.count_thresholds, ctx.cfg.bootstrap_resamples,
                                      ctx.cfg.seed);
  Csv csv("a,b,expected,mean,variance,mean_ratio,mean_ratio_ci,dispersion,dispersion_ci");
  Json rows = Json::array();
  for (const auto& r : res) {
    csv.row(r.window.lo, r.window.hi, r.expected, r.mean, r.variance, r.mean_ratio.value, r.mean_ratio.half_width,
            r.dispersion.value, r.dispersion.half_width);
    Json ex = Json::array();
    for (std::size_t i = 0; i < r.thresholds.size(); ++i) ex.push_back({r.thresholds[i], r.exceedance[i]});
    rows.push_back({{"a", r.window.lo},
                    {"b", r.window.hi},
                    {"expected", r.expected},
                    {"mean", r.mean},
                    {"variance", r.variance},
                    {"mean_ratio", r.mean_ratio.value},
                    {"mean_ratio_ci", r.mean_ratio.half_width},
                    {"dispersion", r.dispersion.value},
                    {"dispersion_ci", r.dispersion.half_width},
                    {"exceedance", std::move(ex)}});
  }
  write_text(ctx.dir / "counts.csv", csv.text());
  return {{"windows", std::move(rows)}};
}

struct StateRow {
  std::size_t index;
  double energy;
  Site center;
  double gamma;
  double xi;
  std::string flag;
};

struct CellOutcome {
  std::vector<int> x;
  MatchReport match;
  std::vector<double> conditioned;
};

inline std::string_view flag_name(LocalizationFlag f) {
  return f == LocalizationFlag::Localized ? "localized" : "delocalized";
}

inline Json localization_stage(const Context& ctx, const FittedEnsemble& f) {
  ctx.touched("localization", f.odd);
  const int d = ctx.cfg.dimension;
  const BoxGeometry subbox(d, ctx.cfg.subbox(), ctx.cfg.boundary);
  std::vector<std::vector<StateRow>> rows(f.odd.size());
  std::vector<std::optional<CenterFiltered>> filtered(f.odd.size());
  parallel_for(f.odd.size(), ctx.opts.threads, [&](std::size_t i) {
    const auto& base = f.odd[i];
    try {
      const Hamiltonian h = sample_hamiltonian(ctx.model, ctx.geom, base.realization_index);
      const Spectrum s = with_window_vectors(h, base, f.window);
      const auto [first, last] = index_range(s, f.window);
      for (std::size_t n = first; n < last; ++n) {
        const auto v = s.vector(*s.column_of(n));
        const Site c = localization_center(v, ctx.geom);
        StateRow r{n, s.eigenvalues[n], c, std::nan(""), std::nan(""), "insufficient"};
        try {
          const auto st = decay_profile(v, c, ctx.geom);
          r.gamma = st.decay_rate;
          r.xi = st.stretch;
          r.flag = flag_name(st.flag);
        } catch (const InsufficientProfileError&) {
        }
        rows[i].push_back(std::move(r));
      }
      filtered[i] = enumerate_centers_in_box(s, f.window, subbox);
    } catch (const std::exception& e) {
      throw StageError("localization", static_cast<long>(base.realization_index), e.what());
    }
  });
  Csv csv("realization,index,energy,center,gamma,xi,flag");
  std::size_t states = 0;
  std::size_t passing = 0;
  std::size_t nf = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const auto& r : rows[i]) {
      csv.row(static_cast<std::size_t>(f.odd[i].realization_index), r.index, r.energy, format_site(r.center, d), r.gamma,
              r.xi, r.flag);
      ++states;
      if (r.flag == "localized" && r.gamma > 0.1) ++passing;
    }
    nf += filtered[i]->count();
  }
  write_text(ctx.dir / "states.csv", csv.text());
  const auto map = unfold(f.ids, f.window);
  const double expected =
      map.mass() * static_cast<double>(subbox.site_count()) * static_cast<double>(std::max<std::size_t>(1, rows.size()));
  std::vector<double> sf;
  std::vector<double> sj;
  for (std::size_t i = 0; i < filtered.size(); ++i) {
    for (double x : unfolded_spacings(*filtered[i], map)) sf.push_back(x);
    if (auto s = unfolded_spacings(f.odd[i], map, SpacingScale::Unfolded)) {
      sj.insert(sj.end(), s->spacings.begin(), s->spacings.end());
    }
  }
  std::sort(sf.begin(), sf.end());
  std::sort(sj.begin(), sj.end());
  return {{"states", states},
          {"fit_pass_fraction", states ? static_cast<double>(passing) / static_cast<double>(states) : 0.0},
          {"subbox_L", ctx.cfg.subbox()},
          {"center_filtered_count", nf},
          {"center_filtered_ratio", static_cast<double>(nf) / expected},
          {"xi_f_spacing_ks", (sf.empty() || sj.empty()) ? Json(nullptr) : Json(ks_two_sample(sf, sj))}};
}

inline Json multiscale_stage(const Context& ctx, const FittedEnsemble& f) {
  ctx.touched("multiscale", f.odd);
  const auto dec = decompose(ctx.geom, ctx.cfg.cell_side, ctx.cfg.buffer);
  const auto map = unfold(f.ids, f.window);
  std::vector<CellOutcome> per(f.odd.size());
  parallel_for(f.odd.size(), ctx.opts.threads, [&](std::size_t i) {
    const auto& base = f.odd[i];
    try {
      const Hamiltonian h = sample_hamiltonian(ctx.model, ctx.geom, base.realization_index);
      const Spectrum parent = with_window_vectors(h, base, f.window);
      std::vector<Spectrum> cells;
      cells.reserve(dec.cells.size());
      for (const auto& cell : dec.cells) cells.push_back(solve(restrict_to(h, cell), true));
      for (const auto& c : cells) per[i].x.push_back(bernoulli_X(c, f.window, ctx.cfg.buffer));
      per[i].match = match_across_scales(parent, dec, cells, f.window, ctx.cfg.match_tolerance);
      per[i].conditioned = conditioned_unfolded_distribution(cells, map, ctx.cfg.buffer).unfolded;
    } catch (const std::exception& e) {
      throw StageError("multiscale", static_cast<long>(base.realization_index), e.what());
    }
  });
  Json diag = Json::array();
  std::size_t cells = 0;
  std::size_t ones = 0;
  std::size_t candidates = 0;
  std::size_t matched = 0;
  double worst = 0.0;
  std::vector<double> pooled;
  for (std::size_t i = 0; i < per.size(); ++i) {
    Json pairs = Json::array();
    for (const auto& p : per[i].match.pairs) {
      pairs.push_back({p.parent_energy, p.cell_energy, std::abs(p.parent_energy - p.cell_energy)});
    }
    diag.push_back({{"realization", f.odd[i].realization_index},
                    {"cells", per[i].x.size()},
                    {"X", per[i].x},
                    {"candidates", per[i].match.candidates},
                    {"matched", std::move(pairs)},
                    {"matched_fraction", per[i].match.matched_fraction},
                    {"max_discrepancy", per[i].match.max_discrepancy}});
    cells += per[i].x.size();
    ones += static_cast<std::size_t>(std::count(per[i].x.begin(), per[i].x.end(), 1));
    candidates += per[i].match.candidates;
    matched += per[i].match.pairs.size();
    worst = std::max(worst, per[i].match.max_discrepancy);
    pooled.insert(pooled.end(), per[i].conditioned.begin(), per[i].conditioned.end());
  }
  write_text(ctx.dir / "multiscale.json", diag.dump(2) + "\n");
  std::sort(pooled.begin(), pooled.end());
  double cell_volume = 1.0;
  for (int i = 0; i < ctx.cfg.dimension; ++i) cell_volume *= ctx.cfg.cell_side;
  const double p1 = cells ? static_cast<double>(ones) / static_cast<double>(cells) : 0.0;
  const double target = map.mass() * cell_volume;
  Json ks = nullptr;
  if (pooled.size() >= kMinConditioned) {
    ks = ks_statistic(pooled, [](double u) { return std::clamp(u, 0.0, 1.0); });
  }
  return {{"cells", cells},
          {"p_x1", p1},
          {"calibrated_mass", target},
          {"relative_deviation", target > 0 ? p1 / target - 1.0 : std::nan("")},
          {"conditioned_samples", pooled.size()},
          {"conditioned_ks_uniform", ks},
          {"candidates", candidates},
          {"matched", matched},
          {"matched_fraction", candidates ? static_cast<double>(matched) / static_cast<double>(candidates) : 0.0},
          {"max_discrepancy", worst},
          {"tolerance", ctx.cfg.match_tolerance}};
}

inline Json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot read " + p.string());
  return Json::parse(in);
}

}  // namespace detail

/// Writes plot_<kind>.csv from the run's report.json and returns its path.
inline fs::path emit_plot_data(const RunManifest& run, PlotKind which) {
  const Json report = detail::read_json(run.directory / "report.json");
  const auto need = [&](const char* section, const char* toggle) -> const Json& {
    if (!report.contains(section)) throw StageMissingError(toggle);
    return report[section];
  };
  detail::Csv csv("");
  switch (which) {
    case PlotKind::Spacing: {
      const Json& s = need("spacing", "stats.spacing");
      csv = detail::Csv("x,empirical,exponential,g_nu_J");
      for (const auto& r : s.value("curve", Json::array())) {
        csv.row(r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>());
      }
      break;
    }
    case PlotKind::Laplace: {
      const Json& s = need("laplace", "stats.laplace");
      // `function` is the position in laplace.functions (same order as the report rows).
      csv = detail::Csv("L,function,empirical,poisson_limit");
      std::vector<std::string> names;
      for (const auto& r : s["rows"]) {
        if (r["empirical"].is_null()) continue;
        const auto name = r["function"].get<std::string>();
        auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) it = names.insert(names.end(), name);
        csv.row(r["L"].get<int>(), static_cast<std::size_t>(it - names.begin()), r["empirical"].get<double>(),
                r["poisson_limit"].get<double>());
      }
      break;
    }
    case PlotKind::Wegner: {
      const Json& s = need("wegner", "stats.wegner");
      csv = detail::Csv("log_width,log_first_moment,log_second_factorial_moment");
      for (const auto& r : s["points"]) {
        if (!(r[1].get<double>() > 0.0 && r[2].get<double>() > 0.0)) continue;  // no log of an empty count
        csv.row(std::log(r[0].get<double>()), std::log(r[1].get<double>()), std::log(r[2].get<double>()));
      }
      break;
    }
    case PlotKind::Counts: {
      const Json& s = need("counts", "stats.counts");
      csv = detail::Csv("width,expected,dispersion,dispersion_ci");
      for (const auto& r : s["windows"]) {
        csv.row(r["b"].get<double>() - r["a"].get<double>(), r["expected"].get<double>(),
                r["dispersion"].get<double>(), r["dispersion_ci"].get<double>());
      }
      break;
    }
  }
  const fs::path out = run.directory / ("plot_" + std::string(plot_name(which)) + ".csv");
  detail::write_text(out, csv.text());
  return out;
}

inline void write_manifest(const RunManifest& m) {
  Json files = Json::array();
  for (const auto& f : m.files) files.push_back({{"name", f.name}, {"checksum", hex64(f.checksum)}, {"bytes", f.bytes}});
  Json timings = Json::object();
  for (const auto& [stage, sec] : m.timings) timings[stage] = sec;
  const Json j = {{"config_hash", m.config_hash},
                  {"code_version", m.code_version},
                  {"timings_seconds", std::move(timings)},
                  {"cache", {{"hits", m.cache_hits}, {"misses", m.cache_misses}}},
                  {"files", std::move(files)}};
  detail::write_text(m.directory / "manifest.json", j.dump(2) + "\n");
}

inline RunManifest read_manifest(const fs::path& dir) {
  const Json j = detail::read_json(dir / "manifest.json");
  RunManifest m;
  m.directory = dir;
  m.config_hash = j.at("config_hash").get<std::string>();
  m.code_version = j.at("code_version").get<std::string>();
  for (const auto& [k, v] : j.at("timings_seconds").items()) m.timings.emplace_back(k, v.get<double>());
  for (const auto& f : j.at("files")) {
    m.files.push_back({f.at("name").get<std::string>(), std::stoull(f.at("checksum").get<std::string>(), nullptr, 16),
                       f.at("bytes").get<std::uintmax_t>()});
  }
  return m;
}

/// Names of listed files whose content no longer matches the manifest.
inline std::vector<std::string> verify_manifest(const RunManifest& m) {
  std::vector<std::string> bad;
  for (const auto& f : m.files) {
    try {
      if (file_checksum((m.directory / f.name).string()) != f.checksum) bad.push_back(f.name);
    } catch (const std::exception&) {
      bad.push_back(f.name);
    }
  }
  return bad;
}

inline fs::path resolve_cache_dir(const RunOptions& opts, const fs::path& out) {
  if (opts.cache) return *opts.cache;
  if (const char* env = std::getenv("ANDERSON_SPECTRA_CACHE"); env && *env) return env;
  return out / "cache";
}

/// sample -> solve -> IDS fit (even realizations) -> statistics (odd
/// realizations) -> reports, plots and manifest.
inline RunManifest run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  validate(cfg);
  const fs::path dir = !opts.out.empty() ? opts.out
                       : !cfg.output_dir.empty() ? fs::path(cfg.output_dir)
                                                 : fs::path("runs") / hex64(cfg.hash());
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
  const SpectraCache cache(resolve_cache_dir(opts, dir));

  RunManifest manifest;
  manifest.directory = dir;
  manifest.config_hash = hex64(cfg.hash());
  manifest.code_version = kVersion;
  detail::Context ctx{cfg, opts, cfg.disorder(), cfg.geometry(), &cache, manifest, dir};
  const auto timed = [&](const char* stage, auto&& body) {
    detail::Stopwatch sw;
    auto result = body();
    manifest.timings.emplace_back(stage, sw.seconds());
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s: %.3f s", stage, manifest.timings.back().second);
    ctx.log(buf);
    return result;
  };

  detail::write_text(dir / "config.canonical", cfg.canonical());
  auto all = timed("solve", [&] {
    return solve_ensemble(ctx.model, ctx.geom, cfg.realizations, opts.threads, &cache, cfg.spectra_key(), opts.force,
                          &manifest.cache_hits, &manifest.cache_misses);
  });
  auto fitted = timed("ids", [&] {
    try {
      return detail::fit_and_split(ctx, std::move(all), ctx.geom);
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError("ids", -1, e.what());
    }
  });

  Json report;
  report["config_hash"] = manifest.config_hash;
  report["code_version"] = manifest.code_version;
  report["geometry"] = {{"d", cfg.dimension}, {"L", cfg.half_side}, {"boundary", to_string(cfg.boundary)},
                        {"sites", ctx.geom.site_count()}};
  report["disorder"] = {{"density", cfg.density}, {"lambda", cfg.coupling}, {"seed", cfg.seed}};
  report["realizations"] = {{"total", cfg.realizations}, {"ids_fit", fitted.even.size()},
                            {"statistics", fitted.odd.size()}};
  {
    const auto& ids = *fitted.ids;
    report["ids"] = {{"pooled_eigenvalues", ids.pooled_count()}, {"bandwidth", ids.bandwidth()}};
    detail::Csv csv("energy,N,nu");
    const Interval r = ids.range();
    for (int i = 0; i <= 200; ++i) {
      const double e = i == 200 ? r.hi : r.lo + r.length() * i / 200.0;
      csv.row(e, ids(e), ids.density(e));
    }
    detail::write_text(dir / "ids.csv", csv.text());
  }
  if (cfg.window.kind != WindowSpec::Kind::None) {
    report["window"] = {{"kind", detail::kind_name(cfg.window.kind)},
                        {"a", fitted.window.lo},
                        {"b", fitted.window.hi},
                        {"mass", (*fitted.ids)(fitted.window.hi) - (*fitted.ids)(fitted.window.lo)}};
  }

  const auto stage = [&](const char* name, bool enabled, auto&& body) {
    if (!enabled) return;
    report[name] = timed(name, [&]() -> Json {
      try {
        return body();
      } catch (const StageError&) {
        throw;
      } catch (const std::exception& e) {
        throw StageError(name, -1, e.what());
      }
    });
  };
  stage("spacing", cfg.spacing, [&] { return detail::spacing_stage(ctx, fitted); });
  stage("laplace", cfg.laplace, [&] { return detail::laplace_stage(ctx, fitted); });
  stage("wegner", cfg.wegner, [&] { return detail::wegner_stage(ctx, fitted); });
  stage("counts", cfg.counts, [&] { return detail::counts_stage(ctx, fitted); });
  stage("localization", cfg.localization, [&] { return detail::localization_stage(ctx, fitted); });
  stage("multiscale", cfg.multiscale, [&] { return detail::multiscale_stage(ctx, fitted); });

  detail::write_text(dir / "report.json", report.dump(2) + "\n");
  const std::pair<bool, PlotKind> plots[] = {{cfg.spacing, PlotKind::Spacing},
                                             {cfg.laplace, PlotKind::Laplace},
                                             {cfg.wegner, PlotKind::Wegner},
                                             {cfg.counts, PlotKind::Counts}};
  for (const auto& [enabled, kind] : plots) {
    if (enabled) emit_plot_data(manifest, kind);
  }

  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() != "manifest.json") {
      names.push_back(entry.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  for (const auto& n : names) {
    manifest.files.push_back({n, file_checksum((dir / n).string()), fs::file_size(dir / n)});
  }
  write_manifest(manifest);
  return manifest;
}

}  // namespace anderson::harness
