// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "anderson/eigensolve.hpp"
#include "anderson/harness/run.hpp"
#include "anderson/hamiltonian.hpp"
#include "anderson/ids.hpp"
#include "anderson/localization.hpp"
#include "anderson/multiscale.hpp"
#include "anderson/pointprocess.hpp"
#include "anderson/statistics.hpp"

using namespace anderson;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double exp_cdf(double x) { return x <= 0.0 ? 0.0 : -std::expm1(-x); }

// Even realizations fit the IDS, odd ones are held out for statistics.
struct Ensemble {
  BoxGeometry geom;
  std::vector<Spectrum> even;
  std::vector<Spectrum> odd;
  std::shared_ptr<const IdsModel> ids;
};

Ensemble make_ensemble(const DisorderModel& model, int half, std::size_t count) {
  Ensemble e{BoxGeometry(1, half, Boundary::Dirichlet), {}, {}, nullptr};
  for (std::uint64_t k = 0; k < count; ++k) {
    Spectrum s = solve(sample_hamiltonian(model, e.geom, k), false);
    s.realization_index = k;
    (k % 2 == 0 ? e.even : e.odd).push_back(std::move(s));
  }
  e.ids = std::make_shared<const IdsModel>(fit_ids(e.even));
  return e;
}

std::vector<double> periodic_free(int d, int side) {
  std::vector<double> axis;
  for (int k = 0; k < side; ++k) axis.push_back(2.0 * std::cos(2.0 * std::numbers::pi * k / side));
  std::vector<double> out{0.0};
  for (int i = 0; i < d; ++i) {
    std::vector<double> next;
    for (double a : out)
      for (double b : axis) next.push_back(a + b);
    out = std::move(next);
  }
  std::sort(out.begin(), out.end());
  return out;
}

const DisorderModel& model4() {
  static const DisorderModel m(UniformOn{0.0, 1.0}, 4.0, 2024);
  return m;
}

// Shared L = 1000, R = 500 ensemble for criteria 2, 3, 4 and 5.
const Ensemble& main_ensemble() {
  static const Ensemble e = make_ensemble(model4(), 1000, 500);
  return e;
}

Outcome c1() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (auto [d, half] : {std::pair{1, 100}, std::pair{2, 10}}) {
    const BoxGeometry g(d, half, Boundary::Periodic);
    const Hamiltonian h(g, std::vector<double>(g.site_count(), 0.0));
    const auto s = solve(h, false);
    const auto ref = periodic_free(d, g.side());
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(s.eigenvalues[i] - ref[i]));
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-11 && t < 1.0, fmt("max |E - 2 sum cos| = %.2e (tol 1e-11), %.3f s (< 1 s)", worst, t)};
}

Outcome c2() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& e = main_ensemble();
  const Interval j = mass_centered_window(*e.ids, 2.0, 0.2);
  const auto map = unfold(e.ids, j);
  std::vector<SpacingSample> samples;
  for (const auto& s : e.odd) {
    if (auto x = unfolded_spacings(s, map, SpacingScale::Unfolded)) samples.push_back(std::move(*x));
  }
  const auto pooled = pooled_spacings(samples);
  const double ks = ks_statistic(pooled, exp_cdf);
  const double at_one[] = {1.0};
  const double d1 = dls(samples, at_one).front();
  const bool pass = ks <= 0.01 && std::abs(d1 - std::exp(-1.0)) <= 0.01;
  return {pass, fmt("J = [%.4f, %.4f], %zu spacings, KS = %.4f (<= 0.01), DLS(1) = %.4f (e^-1 = %.4f +- 0.01), %.0f s",
                    j.lo, j.hi, pooled.size(), ks, d1, std::exp(-1.0), seconds_since(t0))};
}

Outcome c3() {
  const auto& e = main_ensemble();
  const Interval j{-1.5, 1.0};
  const auto map = unfold(e.ids, j);
  double lo = 1e300;
  double hi = 0.0;
  for (int i = 0; i <= 200; ++i) {
    const double v = nu_J(map, std::min(j.hi, j.lo + j.length() * i / 200.0));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<SpacingSample> samples;
  for (const auto& s : e.odd) {
    if (auto x = unfolded_spacings(s, map, SpacingScale::MeanDensity)) samples.push_back(std::move(*x));
  }
  std::vector<double> grid;
  for (int i = 0; i <= 400; ++i) grid.push_back(0.01 * i);
  const auto emp = dls(samples, grid);
  const auto theory = g_nu_J(map, grid);
  double sup = 0.0;
  double sup_exp = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    sup = std::max(sup, std::abs(emp[i] - theory[i]));
    sup_exp = std::max(sup_exp, std::abs(emp[i] - std::exp(-grid[i])));
  }
  const bool pass = hi / lo >= 2.0 && sup <= 0.02;
  return {pass, fmt("J = [%.2f, %.2f], nu max/min = %.2f (>= 2), sup |DLS - g| on [0,4] = %.4f (<= 0.02); "
                    "vs plain exponential %.4f",
                    j.lo, j.hi, hi / lo, sup, sup_exp)};
}

Outcome c4() {
  const std::vector<TestFunction> fs = {IndicatorSmooth{1.0, 0.0, 1.0, 0.25}, Triangle{0.0, 1.0, 1.0},
                                        IndicatorSmooth{0.5, -2.0, 2.0, 0.5}};
  const auto grid = t_grid(2001);
  const auto errors = [&](const Ensemble& e) {
    const auto map = unfold(e.ids, mass_centered_window(*e.ids, 2.0, 0.2));
    std::vector<double> out;
    for (const auto& f : fs) {
      double acc = 0.0;
      for (const auto& s : e.odd) acc += laplace_functional(s, map, f, grid);
      out.push_back(acc / static_cast<double>(e.odd.size()) - poisson_limit(f));
    }
    return out;
  };
  // Fixed budget of pooled sites: R |Lambda| about 10^6 per size.
  const DisorderModel m250(UniformOn{0.0, 1.0}, 4.0, 2274);
  const DisorderModel m500(UniformOn{0.0, 1.0}, 4.0, 2524);
  const std::vector<std::vector<double>> err = {errors(make_ensemble(m250, 250, 2000)),
                                                errors(make_ensemble(m500, 500, 1000)), errors(main_ensemble())};
  bool pass = true;
  std::string detail;
  for (std::size_t f = 0; f < fs.size(); ++f) {
    const double a = std::abs(err[0][f]);
    const double b = std::abs(err[1][f]);
    const double c = std::abs(err[2][f]);
    const bool ok = a > b && b > c && c <= 0.02;
    pass = pass && ok;
    detail += fmt("%s%s: |err| %.4f > %.4f > %.4f%s", f ? "; " : "", fs[f].to_spec().c_str(), a, b, c, ok ? "" : " (x)");
  }
  return {pass, detail + " (L = 250, 500, 1000; <= 0.02 at 1000)"};
}

Outcome c5() {
  const auto& e = main_ensemble();
  const Interval j = mass_centered_window(*e.ids, 2.0, 0.2);
  const auto map = unfold(e.ids, j);
  // t drawn on a grid uniform in N_J, i.e. E distributed with density nu_J.
  const int m = 40;
  const double reach = 5.0;
  std::vector<double> a;
  std::vector<double> b;
  const auto gaps = [&](const std::vector<double>& pts, std::vector<double>& out) {
    std::vector<double> q;
    for (double x : pts) {
      if (std::abs(x) <= reach) q.push_back(x);
    }
    std::sort(q.begin(), q.end());
    for (std::size_t i = 1; i < q.size(); ++i) out.push_back(q[i] - q[i - 1]);
  };
  for (const auto& s : e.odd) {
    for (int i = 0; i < m; ++i) {
      const double u = (i + 0.5) / m;
      gaps(xi_J(s, map, u).points, a);
      gaps(xi_tilde(s, *e.ids, j, map.inverse(u)).points, b);
    }
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double ks = ks_two_sample(a, b);
  return {ks <= 0.02, fmt("%zu / %zu gaps within |x| <= %.0f, two-sample KS = %.4f (<= 0.02)", a.size(), b.size(), reach, ks)};
}

Outcome c6() {
  const Ensemble e = make_ensemble(model4(), 1000, 200);
  std::vector<double> widths;
  for (int i = 0; i <= 5; ++i) widths.push_back(0.002 * std::pow(10.0, i / 5.0));
  ScanOptions opts;
  opts.seed = 6;
  const auto rep = wegner_minami_scan(e.odd, {1.0, 3.0}, widths, opts);
  const DisorderModel one(UniformOn{0.0, 1.0}, 1.0, 1);
  const auto mo = single_site_moments(one, {0.2, 0.3});
  const bool oracle = std::abs(mo.first - 0.1) < 1e-15 && mo.second_factorial == 0.0;
  const bool pass = std::abs(rep.wegner_slope.value - 1.0) <= 0.1 && std::abs(rep.minami_slope.value - 2.0) <= 0.2 && oracle;
  return {pass, fmt("widths %.3g..%.3g, first-moment slope %.3f +- %.3f (1 +- 0.1), second factorial slope %.3f +- %.3f "
                    "(2 +- 0.2), one-site oracle E[tr] = %.3g, E[tr(tr-1)] = %.3g",
                    widths.front(), widths.back(), rep.wegner_slope.value, rep.wegner_slope.half_width,
                    rep.minami_slope.value, rep.minami_slope.half_width, mo.first, mo.second_factorial)};
}

Outcome c7() {
  // Sturm counts in windows of expected count mu at E = 2 on L = 5000 chains;
  // even realizations estimate |N(J)| |Lambda|, odd ones give the statistics.
  const BoxGeometry g(1, 5000, Boundary::Dirichlet);
  const Ensemble pilot = make_ensemble(model4(), 1000, 20);
  const double nu = pilot.ids->density(2.0);
  const std::vector<double> mus = {5.0, 10.0};
  std::vector<Interval> windows;
  for (double mu : mus) {
    const double w = mu / (nu * static_cast<double>(g.site_count()));
    windows.push_back({2.0 - 0.5 * w, 2.0 + 0.5 * w});
  }
  const std::size_t realizations = 10000;
  std::vector<std::vector<double>> even(mus.size());
  std::vector<std::vector<double>> odd(mus.size());
  for (std::uint64_t k = 0; k < realizations; ++k) {
    const auto h = sample_hamiltonian(model4(), g, 1000000 + k);
    for (std::size_t w = 0; w < windows.size(); ++w) {
      (k % 2 == 0 ? even : odd)[w].push_back(static_cast<double>(count_in_interval(h, windows[w])));
    }
  }
  bool pass = true;
  std::string detail;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    double sum = 0.0;
    for (double c : even[w]) sum += c;
    const double expected = sum / static_cast<double>(even[w].size());
    const double th[] = {0.5};
    const auto cf = count_fluctuation(windows[w], odd[w], expected, th, 500, 7 + w);
    const bool ok = std::abs(cf.mean_ratio.value - 1.0) <= 0.02 && std::abs(cf.dispersion.value - 1.0) <= 0.1;
    pass = pass && ok;
    detail += fmt("%smu %.0f: mean ratio %.4f +- %.4f, var/mean %.4f +- %.4f%s", w ? "; " : "", mus[w],
                  cf.mean_ratio.value, cf.mean_ratio.half_width, cf.dispersion.value, cf.dispersion.half_width,
                  ok ? "" : " (x)");
  }
  return {pass, detail + " (ratio 1 +- 0.02, var/mean 1 +- 0.1)"};
}

Outcome c8() {
  // Parent L = 1200 so that centers near the L = 1000 sub-box edge are seen.
  const Ensemble fit = make_ensemble(model4(), 1000, 200);
  const BoxGeometry parent(1, 1200, Boundary::Dirichlet);
  const BoxGeometry sub(1, 1000, Boundary::Dirichlet);
  const Interval j = mass_centered_window(*fit.ids, 2.0, 0.2);
  const double mass = (*fit.ids)(j.hi) - (*fit.ids)(j.lo);
  std::size_t filtered = 0;
  std::size_t states = 0;
  std::size_t pass_fit = 0;
  const int realizations = 20;
  for (int k = 0; k < realizations; ++k) {
    const auto h = sample_hamiltonian(model4(), parent, 5000 + static_cast<std::uint64_t>(k));
    auto s = eigen_tridiag_fast(h);
    const auto [first, last] = index_range(s, j);
    tridiagonal_eigenvectors(h, s, first, last);
    filtered += enumerate_centers_in_box(s, j, sub).count();
    for (std::size_t n = first; n < last; ++n) {
      const auto v = s.vector(*s.column_of(n));
      const auto st = decay_profile(v, localization_center(v, parent), parent);
      ++states;
      if (st.flag == LocalizationFlag::Localized && st.decay_rate > 0.1) ++pass_fit;
    }
  }
  const double frac = static_cast<double>(pass_fit) / static_cast<double>(states);
  const double ratio = static_cast<double>(filtered) / realizations / (mass * static_cast<double>(sub.site_count()));
  return {frac >= 0.95 && std::abs(ratio - 1.0) <= 0.05,
          fmt("%zu states, fit pass fraction %.4f (>= 0.95), N^f / (|N(J)| |Lambda|) = %.4f (1 +- 0.05)", states, frac,
              ratio)};
}

Outcome c9() {
  std::string detail;
  bool pass = true;
  // (a) P(X = 1) against |N(I)| |Lambda_ell| for mu in [0.05, 0.2].
  {
    const DisorderModel m(UniformOn{0.0, 1.0}, 4.0, 11);
    const Ensemble pilot = make_ensemble(m, 1000, 20);
    const BoxGeometry parent(1, 5000, Boundary::Dirichlet);
    const int ell = 100;
    const int buffer = 4;
    const auto dec = decompose(parent, ell, buffer);
    const int parents = 400;
    for (double mu : {0.05, 0.1, 0.2}) {
      const Interval window = mass_centered_window(*pilot.ids, 2.0, mu / ell);
      std::size_t eig = 0;
      std::size_t sites = 0;
      std::size_t cells = 0;
      std::size_t hits = 0;
      for (int k = 0; k < 2 * parents; ++k) {
        const auto h = sample_hamiltonian(m, parent, 2000000 + static_cast<std::uint64_t>(k));
        if (k % 2 == 0) {
          eig += count_in_interval(h, window);
          sites += parent.site_count();
          continue;
        }
        for (const auto& c : dec.cells) {
          ++cells;
          const auto hc = restrict_to(h, c);
          if (count_in_interval(hc, window) != 1) continue;
          auto s = eigen_tridiag_fast(hc);
          const auto [a, b] = index_range(s, window);
          tridiagonal_eigenvectors(hc, s, a, b);
          hits += static_cast<std::size_t>(bernoulli_X(s, window, buffer));
        }
      }
      const double p = static_cast<double>(hits) / static_cast<double>(cells);
      const double target = static_cast<double>(eig) / static_cast<double>(sites) * ell;
      const double rel = p / target - 1.0;
      const bool ok = std::abs(rel) <= 0.1;
      pass = pass && ok;
      detail += fmt("|N(I)| ell = %.3f (aimed %.2f): P(X=1) %.5f (%+.1f%%)%s; ", target, mu, p, 100.0 * rel, ok ? "" : " (x)");
    }
  }
  // (b) cross-scale matching in the lower band tail, ell = 60, buffer 12.
  {
    const DisorderModel m(UniformOn{0.0, 1.0}, 4.0, 7);
    const BoxGeometry g(1, 1000, Boundary::Dirichlet);
    const Ensemble fit = make_ensemble(m, 1000, 20);
    const auto quantile = [&](double q) {
      double lo = fit.ids->range().lo;
      double hi = fit.ids->range().hi;
      for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        ((*fit.ids)(mid) < q ? lo : hi) = mid;
      }
      return hi;
    };
    const auto dec = decompose(g, 60, 12);
    const auto run = [&](Interval window) {
      std::size_t candidates = 0;
      std::size_t matched = 0;
      double worst = 0.0;
      for (std::uint64_t k = 100; k < 130; ++k) {
        const auto h = sample_hamiltonian(m, g, k);
        auto s = eigen_tridiag_fast(h);
        const auto [a, b] = index_range(s, window);
        tridiagonal_eigenvectors(h, s, a, b);
        std::vector<Spectrum> cs;
        for (const auto& c : dec.cells) cs.push_back(solve(restrict_to(h, c), true));
        const auto rep = match_across_scales(s, dec, cs, window, 1e-4);
        candidates += rep.candidates;
        matched += rep.pairs.size();
        worst = std::max(worst, rep.max_discrepancy);
      }
      return std::tuple{candidates, static_cast<double>(matched) / static_cast<double>(candidates), worst};
    };
    const auto [cand, frac, worst] = run({quantile(0.01), quantile(0.03)});
    const auto [ccand, cfrac, cworst] = run({quantile(0.49), quantile(0.51)});
    const bool ok = frac >= 0.9 && worst <= 1e-4;
    pass = pass && ok;
    detail += fmt("matching (N in [0.01, 0.03]): %zu candidates, fraction %.3f (>= 0.9), max |dE| %.2e (<= 1e-4)%s "
                  "[band centre, not gated: fraction %.3f]; ",
                  cand, frac, worst, ok ? "" : " (x)", cfrac);
    (void)ccand;
    (void)cworst;
  }
  // (c) hopping off: cell and parent agree exactly.
  {
    const DisorderModel m(UniformOn{0.0, 1.0}, 4.0, 13);
    const BoxGeometry g(1, 1000, Boundary::Dirichlet);
    const auto dec = decompose(g, 60, 12);
    bool exact = true;
    for (std::uint64_t k = 0; k < 10; ++k) {
      const auto h = sample_hamiltonian(m, g, k).without_hopping();
      const auto ps = solve(h, true);
      const Interval window{0.5, 3.5};
      std::vector<Spectrum> cs;
      for (const auto& c : dec.cells) cs.push_back(solve(restrict_to(h, c), true));
      const auto rep = match_across_scales(ps, dec, cs, window, 1e-4);
      exact = exact && rep.candidates > 0 && rep.matched_fraction == 1.0 && rep.max_discrepancy == 0.0;
      // X from the cell operator equals X read off the parent's levels in the cell.
      const Interval narrow{1.0, 1.02};
      const auto [a, b] = index_range(ps, narrow);
      for (std::size_t c = 0; c < dec.cells.size(); ++c) {
        std::size_t inside = 0;
        std::size_t deep = 0;
        for (std::size_t n = a; n < b; ++n) {
          const Site center = localization_center(ps.vector(*ps.column_of(n)), g);
          if (dec.cells[c].contains(center)) {
            ++inside;
            if (eroded(dec.cells[c], dec.buffer).contains(center)) ++deep;
          }
        }
        const int from_parent = inside == 1 && deep == 1 ? 1 : 0;
        exact = exact && from_parent == bernoulli_X(cs[c], narrow, dec.buffer);
      }
    }
    pass = pass && exact;
    detail += fmt("hopping off: %s", exact ? "exact" : "MISMATCH (x)");
  }
  return {pass, detail};
}

Outcome c10(const fs::path& out) {
  fs::remove_all(out / "threads1");
  fs::remove_all(out / "threads4");
  const auto cfg = harness::load_config(ANDERSON_SMOKE_CONFIG);
  const auto run = [&](const char* name, unsigned threads) {
    harness::RunOptions o;
    o.threads = threads;
    o.out = out / name;
    o.cache = out / name / "cache";
    return harness::run_experiment(cfg, o);
  };
  const auto a = run("threads1", 1);
  const auto b = run("threads4", 4);
  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  std::size_t same = 0;
  std::vector<std::string> differ;
  for (const auto& f : a.files) {
    if (slurp(a.directory / f.name) == slurp(b.directory / f.name)) {
      ++same;
    } else {
      differ.push_back(f.name);
    }
  }
  const bool pass = differ.empty() && a.files.size() == b.files.size() && same > 0;
  std::string detail = fmt("%zu / %zu report files byte-identical (1 vs 4 threads)", same, a.files.size());
  for (const auto& d : differ) detail += " differs: " + d;
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string out = "acceptance_runs";
  std::vector<int> only;
  app.add_option("--out", out, "scratch directory for the determinism runs");
  app.add_option("--only", only, "run only these criteria")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(out);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"free spectrum", c1},
      {"Poisson spacing law", c2},
      {"mixed-exponential spacing law", c3},
      {"Laplace functional convergence", c4},
      {"rescaled-process equivalence", c5},
      {"Wegner/Minami scaling", c6},
      {"count statistics", c7},
      {"localization", c8},
      {"multiscale diagnostics", c9},
      {"determinism", [&] { return c10(out); }},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("criterion %2d %s  %s: %s [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
