#pragma once

#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "anderson/disorder.hpp"
#include "anderson/errors.hpp"
#include "anderson/geometry.hpp"
#include "anderson/harness/config.hpp"
#include "anderson/harness/run.hpp"
#include "anderson/multiscale.hpp"
#include "anderson/pointprocess.hpp"
#include "anderson/statistics.hpp"
#include "anderson/version.hpp"

namespace anderson::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

/// Closed-form eigenvalues of the hopping operator (entries 1) on a box of
/// side n per axis, ascending.
inline std::vector<double> free_spectrum(int d, int n, Boundary bc) {
  std::vector<double> axis(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    axis[k] = bc == Boundary::Periodic && n >= 3 ? 2.0 * std::cos(2.0 * std::numbers::pi * k / n)
                                                 : 2.0 * std::cos(std::numbers::pi * (k + 1) / (n + 1));
  }
  if (bc == Boundary::Periodic && n == 2) axis = {-1.0, 1.0};  // single bond, counted once
  std::vector<double> out{0.0};
  for (int i = 0; i < d; ++i) {
    std::vector<double> next;
    next.reserve(out.size() * axis.size());
    for (double a : out) {
      for (double b : axis) next.push_back(a + b);
    }
    out = std::move(next);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace detail {

inline void print_row(std::ostream& os, const std::string& name, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  os << name << " = " << buf << '\n';
}

struct OracleArgs {
  int chain_n = 5;
  int box_d = 2;
  int box_l = 1;
  std::string box_bc = "periodic";
  double ids_e = 0.0;
  std::string lap_f = "triangle(0,1,1)";
  double mix_x = 1.0;
  std::string one_density = "uniform(0,1)";
  double one_lambda = 1.0;
  double one_a = 0.2;
  double one_b = 0.3;
  double ks_alpha = 0.05;
  int dec_l = 50;
  int dec_cell = 9;
  int dec_buffer = 1;
  int b_d = 1;
  std::string b_density = "uniform(0,1)";
  double b_lambda = 10.0;
  double f_volume = 1001.0;
  double f_delta = 0.5;
  double f_threshold = 50.0;
};

inline void add_oracles(CLI::App& oracle, std::ostream& os, OracleArgs& a) {
  oracle.require_subcommand(1);

  auto* chain = oracle.add_subcommand("free-laplacian-1d", "eigenvalues 2cos(k pi/(n+1)), k = 1..n");
  chain->add_option("--n", a.chain_n, "number of sites")->check(CLI::PositiveNumber);
  chain->callback([&os, &a] {
    for (int k = a.chain_n; k >= 1; --k) print_row(os, "k=" + std::to_string(k), 2.0 * std::cos(std::numbers::pi * k / (a.chain_n + 1)));
  });

  auto* box = oracle.add_subcommand("free-laplacian", "tensor-sum spectrum of a free box");
  box->add_option("--d", a.box_d)->check(CLI::Range(1, 3));
  box->add_option("--L", a.box_l, "half side")->check(CLI::NonNegativeNumber);
  box->add_option("--boundary", a.box_bc)->check(CLI::IsMember({"periodic", "dirichlet"}));
  box->callback([&os, &a] {
    const auto ev = free_spectrum(a.box_d, 2 * a.box_l + 1, parse_boundary(a.box_bc));
    for (std::size_t i = 0; i < ev.size(); ++i) print_row(os, "E" + std::to_string(i), std::abs(ev[i]) < 1e-14 ? 0.0 : ev[i]);
  });

  auto* ids = oracle.add_subcommand("free-ids", "free 1-d IDS N(E) = 1 - arccos(E/2)/pi and its density");
  ids->add_option("--E", a.ids_e)->check(CLI::Range(-2.0, 2.0));
  ids->callback([&os, &a] {
    print_row(os, "N", 1.0 - std::acos(a.ids_e / 2.0) / std::numbers::pi);
    if (std::abs(a.ids_e) < 2.0) print_row(os, "nu", 1.0 / (std::numbers::pi * std::sqrt(4.0 - a.ids_e * a.ids_e)));
  });

  auto* lap = oracle.add_subcommand("poisson-laplace", "exp(-int(1 - e^-phi)) for a test function");
  lap->add_option("--function", a.lap_f, "indicator(h,a,b,ramp) or triangle(c,hw,h)");
  lap->callback([&os, &a] {
    const auto f = parse_test_function(a.lap_f);
    print_row(os, f.to_spec(), poisson_limit(f));
  });
  auto* tri = oracle.add_subcommand("triangle-limit", "closed form exp(-2/e) for triangle(0,1,1)");
  tri->callback([&os] { print_row(os, "limit", std::exp(-2.0 * std::exp(-1.0))); });
  auto* ind = oracle.add_subcommand("indicator-limit", "closed form exp(-(1 - 1/e)) for a sharp unit indicator");
  ind->callback([&os] { print_row(os, "limit", std::exp(-(1.0 - std::exp(-1.0)))); });

  auto* mix = oracle.add_subcommand("two-level-mixture", "0.5 e^{-0.5x} + 0.5 e^{-1.5x}");
  mix->add_option("--x", a.mix_x)->check(CLI::NonNegativeNumber);
  mix->callback([&os, &a] { print_row(os, "g", 0.5 * std::exp(-0.5 * a.mix_x) + 0.5 * std::exp(-1.5 * a.mix_x)); });

  auto* one = oracle.add_subcommand("single-site", "first and second factorial moments on one site");
  one->add_option("--density", a.one_density);
  one->add_option("--lambda", a.one_lambda)->check(CLI::NonNegativeNumber);
  one->add_option("--a", a.one_a);
  one->add_option("--b", a.one_b);
  one->callback([&os, &a] {
    const auto m = single_site_moments({parse_density(a.one_density), a.one_lambda, 1}, {a.one_a, a.one_b});
    print_row(os, "first", m.first);
    print_row(os, "second_factorial", m.second_factorial);
  });

  auto* ks = oracle.add_subcommand("ks-critical", "asymptotic Kolmogorov critical value");
  ks->add_option("--alpha", a.ks_alpha)->check(CLI::Range(1e-6, 0.5));
  ks->callback([&os, &a] { print_row(os, "c_alpha", ks_critical(a.ks_alpha)); });

  auto* dec = oracle.add_subcommand("decompose", "cells per axis and covered sites, d = 1");
  dec->add_option("--L", a.dec_l)->check(CLI::PositiveNumber);
  dec->add_option("--cell", a.dec_cell)->check(CLI::PositiveNumber);
  dec->add_option("--buffer", a.dec_buffer)->check(CLI::NonNegativeNumber);
  dec->callback([&os, &a] {
    const auto c = decompose(BoxGeometry(1, a.dec_l, Boundary::Dirichlet), a.dec_cell, a.dec_buffer);
    print_row(os, "cells", static_cast<double>(c.cells.size()));
    print_row(os, "covered", static_cast<double>(c.covered_volume()));
    print_row(os, "sites", static_cast<double>(c.parent.site_count()));
  });

  auto* bounds = oracle.add_subcommand("spectrum-bounds", "[-2d + lambda min supp g, 2d + lambda max supp g]");
  bounds->add_option("--d", a.b_d)->check(CLI::Range(1, 3));
  bounds->add_option("--density", a.b_density);
  bounds->add_option("--lambda", a.b_lambda)->check(CLI::NonNegativeNumber);
  bounds->callback([&os, &a] {
    const auto s = almost_sure_spectrum({parse_density(a.b_density), a.b_lambda, 1}, BoxGeometry(a.b_d, 1, Boundary::Periodic));
    print_row(os, "lo", s.lo);
    print_row(os, "hi", s.hi);
  });

  auto* flat = oracle.add_subcommand("shrinking-flat", "window length 50 |Lambda|^(delta - 1) on a flat IDS");
  flat->add_option("--volume", a.f_volume)->check(CLI::PositiveNumber);
  flat->add_option("--delta", a.f_delta)->check(CLI::Range(0.0, 1.0));
  flat->add_option("--threshold", a.f_threshold)->check(CLI::PositiveNumber);
  flat->callback([&os, &a] { print_row(os, "length", a.f_threshold * std::pow(a.f_volume, a.f_delta - 1.0)); });
}

}  // namespace detail

/// `anderson run|validate|report|oracle ...`. Exit codes: 0 success, 1
/// configuration or usage error, 2 runtime failure.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Spectral statistics of the Anderson model", "anderson"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config_path;
  unsigned threads = default_threads();
  std::string out_dir;
  std::string cache_dir;
  bool force = false;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("config", config_path)->required();
  run->add_option("--threads", threads, "worker threads (default: logical cores)")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "output directory (overrides output.dir)");
  run->add_option("--cache", cache_dir, "spectra cache directory (default: $ANDERSON_SPECTRA_CACHE or <out>/cache)");
  run->add_flag("--force", force, "recompute spectra even when cached");
  run->add_flag("--quiet", quiet, "no per-stage timing lines");

  auto* val = app.add_subcommand("validate", "parse and check a config; print its canonical form and hash");
  val->add_option("config", config_path)->required();

  std::string run_dir;
  std::vector<std::string> plots;
  bool verify = false;
  auto* rep = app.add_subcommand("report", "summarize a finished run");
  rep->add_option("run-dir", run_dir)->required();
  rep->add_option("--plot", plots, "emit plot CSVs")->check(CLI::IsMember({"spacing", "laplace", "wegner", "counts"}));
  rep->add_flag("--verify", verify, "recompute file checksums against the manifest");

  auto* oracle = app.add_subcommand("oracle", "print closed-form reference values");
  detail::OracleArgs oracle_args;
  detail::add_oracles(*oracle, out, oracle_args);

  try {
    // Oracle subcommands run inside parse().
    app.parse(argc, argv);
    if (*val) {
      const auto cfg = load_config(config_path);
      out << cfg.canonical() << "hash = " << hex64(cfg.hash()) << '\n';
    } else if (*run) {
      const auto cfg = load_config(config_path);
      RunOptions opts;
      opts.threads = threads;
      opts.out = out_dir;
      if (!cache_dir.empty()) opts.cache = cache_dir;
      opts.force = force;
      if (!quiet) opts.log = &err;
      const auto m = run_experiment(cfg, opts);
      out << (m.directory / "report.json").string() << '\n';
    } else if (*rep) {
      const auto m = read_manifest(run_dir);
      for (const auto& p : plots) {
        const PlotKind k = p == "spacing"  ? PlotKind::Spacing
                           : p == "laplace" ? PlotKind::Laplace
                           : p == "wegner"  ? PlotKind::Wegner
                                            : PlotKind::Counts;
        out << emit_plot_data(m, k).string() << '\n';
      }
      if (verify) {
        const auto bad = verify_manifest(m);
        for (const auto& b : bad) err << "checksum mismatch: " << b << '\n';
        if (!bad.empty()) return kExitRuntime;
      }
      out << (m.directory / "report.json").string() << '\n';
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return kExitOk;
    err << app.help();
    return kExitConfig;
  } catch (const ArgumentError& e) {
    err << "invalid argument: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error";
    if (e.line() > 0) err << " (line " << e.line() << ")";
    if (!e.field().empty()) err << " [" << e.field() << "]";
    err << ": " << e.what() << '\n';
    return kExitConfig;
  } catch (const StageMissingError& e) {
    err << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace anderson::harness
