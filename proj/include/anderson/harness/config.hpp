#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "anderson/disorder.hpp"
#include "anderson/errors.hpp"
#include "anderson/geometry.hpp"
#include "anderson/harness/checksum.hpp"
#include "anderson/pointprocess.hpp"

namespace anderson::harness {

struct WindowSpec {
  enum class Kind { None, Explicit, MassCentered, Shrinking };
  Kind kind = Kind::None;
  double a = 0.0;
  double b = 0.0;
  double e0 = 0.0;
  double mass = 0.2;
  double delta = 0.5;
  double rho_tilde = 1.0;
  double threshold = 50.0;
};

/// One experiment. Everything except `output_dir` enters the canonical form.
struct ExperimentConfig {
  int dimension = 1;
  int half_side = 100;
  Boundary boundary = Boundary::Dirichlet;
  std::string density = "uniform(0,1)";
  double coupling = 4.0;
  std::uint64_t seed = 1;
  std::size_t realizations = 20;
  WindowSpec window;
  /// 0 selects Silverman's rule.
  double bandwidth = 0.0;
  std::size_t t_grid = 201;

  bool spacing = false;
  bool laplace = false;
  bool wegner = false;
  bool counts = false;
  bool localization = false;
  bool multiscale = false;

  std::vector<std::string> test_functions = {"triangle(0,1,1)", "indicator(1,0,1,0.25)"};
  /// Extra half-sides for the Laplace functional scan.
  std::vector<int> laplace_sizes;
  /// Empty: five log-spaced widths spanning one decade below |J| / 2.
  std::vector<double> wegner_widths;
  std::size_t wegner_placements = 64;
  std::vector<double> count_thresholds = {0.25, 0.5};
  /// Half-side of the centered sub-box for center filtering; -1 means L.
  int subbox_half_side = -1;
  int cell_side = 20;
  int buffer = 4;
  double match_tolerance = 1e-4;
  std::size_t bootstrap_resamples = 200;

  std::string output_dir;

  [[nodiscard]] bool needs_window() const noexcept {
    return spacing || laplace || wegner || counts || localization || multiscale;
  }
  [[nodiscard]] bool needs_unfolding() const noexcept { return spacing || laplace || counts || localization; }
  [[nodiscard]] BoxGeometry geometry() const { return {dimension, half_side, boundary}; }
  [[nodiscard]] DisorderModel disorder() const { return {parse_density(density), coupling, seed}; }
  [[nodiscard]] int subbox() const noexcept { return subbox_half_side < 0 ? half_side : subbox_half_side; }

  [[nodiscard]] std::string canonical() const;
  [[nodiscard]] std::uint64_t hash() const { return fnv1a(canonical()); }
  /// Key of the spectra cache: only the fields that determine the spectra.
  [[nodiscard]] std::uint64_t spectra_key() const;
};

namespace detail {

using anderson::detail::format_real;
using anderson::detail::parse_real;
using anderson::detail::split;
using anderson::detail::trim;

inline long long parse_integer(std::string_view s) {
  s = trim(s);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ArgumentError("not an integer: '" + std::string(s) + "'");
  return v;
}

inline std::uint64_t parse_unsigned(std::string_view s) {
  s = trim(s);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ArgumentError("not a non-negative integer: '" + std::string(s) + "'");
  }
  return v;
}

inline bool parse_bool(std::string_view s) {
  s = trim(s);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ArgumentError("not a boolean: '" + std::string(s) + "'");
}

inline std::vector<double> parse_reals(std::string_view s) {
  std::vector<double> out;
  if (trim(s).empty()) return out;
  for (auto p : split(s, ',')) out.push_back(parse_real(p));
  return out;
}

inline std::string join_reals(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_real(v[i]);
  return out;
}

inline std::string_view kind_name(WindowSpec::Kind k) {
  switch (k) {
    case WindowSpec::Kind::Explicit: return "explicit";
    case WindowSpec::Kind::MassCentered: return "mass_centered";
    case WindowSpec::Kind::Shrinking: return "shrinking";
    case WindowSpec::Kind::None: break;
  }
  return "none";
}

struct Field {
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

inline int to_int(long long v) {
  if (v < -(1LL << 30) || v > (1LL << 30)) throw ArgumentError("integer out of range");
  return static_cast<int>(v);
}

inline const std::map<std::string, Field, std::less<>>& fields() {
  using C = ExperimentConfig;
  static const std::map<std::string, Field, std::less<>> table = {
      {"geometry.d", {[](C& c, std::string_view v) { c.dimension = to_int(parse_integer(v)); },
                      [](const C& c) { return std::to_string(c.dimension); }}},
      {"geometry.L", {[](C& c, std::string_view v) { c.half_side = to_int(parse_integer(v)); },
                      [](const C& c) { return std::to_string(c.half_side); }}},
      {"geometry.boundary", {[](C& c, std::string_view v) { c.boundary = parse_boundary(trim(v)); },
                             [](const C& c) { return std::string(to_string(c.boundary)); }}},
      {"potential.density", {[](C& c, std::string_view v) { c.density = parse_density(v).to_string(); },
                             [](const C& c) { return c.density; }}},
      {"potential.lambda", {[](C& c, std::string_view v) { c.coupling = parse_real(v); },
                            [](const C& c) { return format_real(c.coupling); }}},
      {"seed", {[](C& c, std::string_view v) { c.seed = parse_unsigned(v); },
                [](const C& c) { return std::to_string(c.seed); }}},
      {"ensemble.R", {[](C& c, std::string_view v) { c.realizations = parse_unsigned(v); },
                      [](const C& c) { return std::to_string(c.realizations); }}},
      {"window.kind",
       {[](C& c, std::string_view v) {
          v = trim(v);
          if (v == "none") c.window.kind = WindowSpec::Kind::None;
          else if (v == "explicit") c.window.kind = WindowSpec::Kind::Explicit;
          else if (v == "mass_centered") c.window.kind = WindowSpec::Kind::MassCentered;
          else if (v == "shrinking") c.window.kind = WindowSpec::Kind::Shrinking;
          else throw ArgumentError("window.kind is one of none, explicit, mass_centered, shrinking");
        },
        [](const C& c) { return std::string(kind_name(c.window.kind)); }}},
      {"window.a", {[](C& c, std::string_view v) { c.window.a = parse_real(v); },
                    [](const C& c) { return format_real(c.window.a); }}},
      {"window.b", {[](C& c, std::string_view v) { c.window.b = parse_real(v); },
                    [](const C& c) { return format_real(c.window.b); }}},
      {"window.E0", {[](C& c, std::string_view v) { c.window.e0 = parse_real(v); },
                     [](const C& c) { return format_real(c.window.e0); }}},
      {"window.mass", {[](C& c, std::string_view v) { c.window.mass = parse_real(v); },
                       [](const C& c) { return format_real(c.window.mass); }}},
      {"window.delta", {[](C& c, std::string_view v) { c.window.delta = parse_real(v); },
                        [](const C& c) { return format_real(c.window.delta); }}},
      {"window.rho_tilde", {[](C& c, std::string_view v) { c.window.rho_tilde = parse_real(v); },
                            [](const C& c) { return format_real(c.window.rho_tilde); }}},
      {"window.threshold", {[](C& c, std::string_view v) { c.window.threshold = parse_real(v); },
                            [](const C& c) { return format_real(c.window.threshold); }}},
      {"ids.bandwidth", {[](C& c, std::string_view v) { c.bandwidth = parse_real(v); },
                         [](const C& c) { return format_real(c.bandwidth); }}},
      {"tgrid.size", {[](C& c, std::string_view v) { c.t_grid = parse_unsigned(v); },
                      [](const C& c) { return std::to_string(c.t_grid); }}},
      {"stats.spacing", {[](C& c, std::string_view v) { c.spacing = parse_bool(v); },
                         [](const C& c) { return std::string(c.spacing ? "true" : "false"); }}},
      {"stats.laplace", {[](C& c, std::string_view v) { c.laplace = parse_bool(v); },
                         [](const C& c) { return std::string(c.laplace ? "true" : "false"); }}},
      {"stats.wegner", {[](C& c, std::string_view v) { c.wegner = parse_bool(v); },
                        [](const C& c) { return std::string(c.wegner ? "true" : "false"); }}},
      {"stats.counts", {[](C& c, std::string_view v) { c.counts = parse_bool(v); },
                        [](const C& c) { return std::string(c.counts ? "true" : "false"); }}},
      {"stats.localization", {[](C& c, std::string_view v) { c.localization = parse_bool(v); },
                              [](const C& c) { return std::string(c.localization ? "true" : "false"); }}},
      {"stats.multiscale", {[](C& c, std::string_view v) { c.multiscale = parse_bool(v); },
                            [](const C& c) { return std::string(c.multiscale ? "true" : "false"); }}},
      {"laplace.functions",
       {[](C& c, std::string_view v) {
          c.test_functions.clear();
          for (auto p : split(v, ';')) {
            if (!p.empty()) c.test_functions.push_back(parse_test_function(p).to_spec());
          }
        },
        [](const C& c) {
          std::string out;
          for (std::size_t i = 0; i < c.test_functions.size(); ++i) out += (i ? ";" : "") + c.test_functions[i];
          return out;
        }}},
      {"laplace.sizes",
       {[](C& c, std::string_view v) {
          c.laplace_sizes.clear();
          if (trim(v).empty()) return;
          for (auto p : split(v, ',')) c.laplace_sizes.push_back(to_int(parse_integer(p)));
        },
        [](const C& c) {
          std::string out;
          for (std::size_t i = 0; i < c.laplace_sizes.size(); ++i) {
            out += (i ? "," : "") + std::to_string(c.laplace_sizes[i]);
          }
          return out;
        }}},
      {"wegner.widths", {[](C& c, std::string_view v) { c.wegner_widths = parse_reals(v); },
                         [](const C& c) { return join_reals(c.wegner_widths); }}},
      {"wegner.placements", {[](C& c, std::string_view v) { c.wegner_placements = parse_unsigned(v); },
                             [](const C& c) { return std::to_string(c.wegner_placements); }}},
      {"counts.thresholds", {[](C& c, std::string_view v) { c.count_thresholds = parse_reals(v); },
                             [](const C& c) { return join_reals(c.count_thresholds); }}},
      {"localization.subbox_L", {[](C& c, std::string_view v) { c.subbox_half_side = to_int(parse_integer(v)); },
                                 [](const C& c) { return std::to_string(c.subbox()); }}},
      {"multiscale.cell", {[](C& c, std::string_view v) { c.cell_side = to_int(parse_integer(v)); },
                           [](const C& c) { return std::to_string(c.cell_side); }}},
      {"multiscale.buffer", {[](C& c, std::string_view v) { c.buffer = to_int(parse_integer(v)); },
                             [](const C& c) { return std::to_string(c.buffer); }}},
      {"multiscale.tolerance", {[](C& c, std::string_view v) { c.match_tolerance = parse_real(v); },
                                [](const C& c) { return format_real(c.match_tolerance); }}},
      {"bootstrap.resamples", {[](C& c, std::string_view v) { c.bootstrap_resamples = parse_unsigned(v); },
                               [](const C& c) { return std::to_string(c.bootstrap_resamples); }}},
      {"output.dir", {[](C& c, std::string_view v) { c.output_dir = std::string(trim(v)); },
                      [](const C& c) { return c.output_dir; }}},
  };
  return table;
}

}  // namespace detail

/// Sorted `key = value` lines, one per field, output.dir excluded.
inline std::string ExperimentConfig::canonical() const {
  std::string out;
  for (const auto& [key, field] : detail::fields()) {
    if (key == "output.dir") continue;
    out += key + " = " + field.get(*this) + "\n";
  }
  return out;
}

inline std::uint64_t ExperimentConfig::spectra_key() const {
  const auto& f = detail::fields();
  std::string s;
  for (const char* key : {"geometry.d", "geometry.L", "geometry.boundary", "potential.density", "potential.lambda",
                          "seed"}) {
    s += std::string(key) + " = " + f.find(key)->second.get(*this) + "\n";
  }
  return fnv1a(s);
}

/// Semantic checks; `lines` maps keys to their source line for diagnostics.
inline void validate(const ExperimentConfig& c, const std::map<std::string, int, std::less<>>& lines = {}) {
  const auto fail = [&](const std::string& field, const std::string& what) {
    const auto it = lines.find(field);
    throw ConfigError(field + ": " + what, it == lines.end() ? 0 : it->second, field);
  };
  if (c.dimension < 1 || c.dimension > 3) fail("geometry.d", "dimension must be 1, 2 or 3");
  if (c.half_side < 1) fail("geometry.L", "half side must be >= 1");
  if (!(c.coupling >= 0.0)) fail("potential.lambda", "coupling must be >= 0");
  if (c.realizations < 1) fail("ensemble.R", "at least one realization is required");
  if (c.needs_unfolding() && c.realizations < 2) {
    fail("ensemble.R", "unfolding needs R >= 2 (IDS fit on even, statistics on odd realizations)");
  }
  const auto& w = c.window;
  if (c.needs_window() && w.kind == WindowSpec::Kind::None) fail("window.kind", "the enabled statistics need a window");
  if (w.kind == WindowSpec::Kind::Explicit && !(w.a < w.b)) fail("window.b", "explicit window needs a < b");
  if (w.kind == WindowSpec::Kind::MassCentered && !(w.mass > 0.0 && w.mass <= 1.0)) {
    fail("window.mass", "mass must lie in (0, 1]");
  }
  if (w.kind == WindowSpec::Kind::Shrinking) {
    if (!(w.delta > 0.0 && w.delta < 1.0)) fail("window.delta", "delta must lie in (0, 1)");
    if (!(w.rho_tilde > 0.0)) fail("window.rho_tilde", "rho_tilde must be positive");
    if (!(w.threshold > 0.0)) fail("window.threshold", "threshold must be positive");
  }
  if (!(c.bandwidth >= 0.0)) fail("ids.bandwidth", "bandwidth must be >= 0");
  if (c.t_grid < 2) fail("tgrid.size", "the t-grid needs at least two points");
  if (c.laplace && c.test_functions.empty()) fail("laplace.functions", "at least one test function is required");
  for (int l : c.laplace_sizes) {
    if (l < 1) fail("laplace.sizes", "sizes must be >= 1");
  }
  for (double x : c.wegner_widths) {
    if (!(x > 0.0)) fail("wegner.widths", "widths must be positive");
  }
  if (c.wegner && c.wegner_placements < 1) fail("wegner.placements", "at least one placement is required");
  if (c.subbox() < 0 || c.subbox() > c.half_side) fail("localization.subbox_L", "sub-box must fit in the box");
  if (c.multiscale) {
    if (c.cell_side < 1 || c.buffer < 0 || c.buffer >= c.cell_side) {
      fail("multiscale.buffer", "need 0 <= buffer < cell");
    }
    if (c.cell_side + c.buffer > 2 * c.half_side + 1) fail("multiscale.cell", "cell plus buffer exceeds the box side");
  }
  if (!(c.match_tolerance > 0.0)) fail("multiscale.tolerance", "tolerance must be positive");
  try {
    (void)c.disorder();
  } catch (const Error& e) {
    fail("potential.density", e.what());
  }
}

/// Parses `key = value` lines; '#' starts a comment. Unknown keys, duplicate
/// keys and malformed values raise ConfigError with line and field.
inline ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::map<std::string, int, std::less<>> lines;
  const auto& table = detail::fields();
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line_no);
    const std::string key(detail::trim(line.substr(0, eq)));
    const auto value = detail::trim(line.substr(eq + 1));
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown key '" + key + "'", line_no, key);
    if (lines.count(key)) throw ConfigError("duplicate key '" + key + "'", line_no, key);
    lines[key] = line_no;
    try {
      it->second.set(cfg, value);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(key + ": " + e.what(), line_no, key);
    }
  }
  validate(cfg, lines);
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace anderson::harness
