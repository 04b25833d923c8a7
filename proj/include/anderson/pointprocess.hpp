#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <variant>
#include <vector>

#include "anderson/disorder.hpp"
#include "anderson/eigensolve.hpp"
#include "anderson/errors.hpp"
#include "anderson/geometry.hpp"
#include "anderson/ids.hpp"

namespace anderson {

/// One realized point configuration of an unfolded eigenvalue process.
struct PointSample {
  std::vector<double> points;
  double origin_t = 0.0;
  Interval window;
  std::uint64_t realization_index = 0;
};

/// Height c on [a, b] with smoothstep ramps of width `ramp` on both sides
/// (C^1; ramp = 0 gives the sharp indicator).
struct IndicatorSmooth {
  double height = 1.0;
  double a = 0.0;
  double b = 1.0;
  double ramp = 0.1;
};

/// Tent of given height on [center - halfwidth, center + halfwidth].
struct Triangle {
  double center = 0.0;
  double halfwidth = 1.0;
  double height = 1.0;
};

/// Non-negative compactly supported test function for Laplace functionals.
class TestFunction {
 public:
  TestFunction(IndicatorSmooth f) : shape_(f) {  // NOLINT(google-explicit-constructor)
    if (!(f.height >= 0.0) || !(f.b >= f.a) || !(f.ramp >= 0.0)) throw ArgumentError("invalid smooth indicator");
  }
  TestFunction(Triangle f) : shape_(f) {  // NOLINT(google-explicit-constructor)
    if (!(f.height >= 0.0) || !(f.halfwidth > 0.0)) throw ArgumentError("invalid triangle");
  }

  [[nodiscard]] double operator()(double x) const noexcept {
    if (const auto* s = std::get_if<IndicatorSmooth>(&shape_)) {
      if (x >= s->a && x <= s->b) return s->height;
      if (s->ramp <= 0.0) return 0.0;
      double u = 0.0;
      if (x < s->a && x > s->a - s->ramp) u = (x - (s->a - s->ramp)) / s->ramp;
      if (x > s->b && x < s->b + s->ramp) u = (s->b + s->ramp - x) / s->ramp;
      return s->height * u * u * (3.0 - 2.0 * u);
    }
    const auto& t = std::get<Triangle>(shape_);
    const double r = std::abs(x - t.center) / t.halfwidth;
    return r < 1.0 ? t.height * (1.0 - r) : 0.0;
  }

  /// Closed support [lo, hi].
  [[nodiscard]] Interval support() const noexcept {
    if (const auto* s = std::get_if<IndicatorSmooth>(&shape_)) return {s->a - s->ramp, s->b + s->ramp};
    const auto& t = std::get<Triangle>(shape_);
    return {t.center - t.halfwidth, t.center + t.halfwidth};
  }

  /// R with supp f inside [-R, R].
  [[nodiscard]] double support_radius() const noexcept {
    const Interval s = support();
    return std::max(std::abs(s.lo), std::abs(s.hi));
  }

  /// Points where the function is not smooth (quadrature breakpoints).
  [[nodiscard]] std::vector<double> breakpoints() const {
    if (const auto* s = std::get_if<IndicatorSmooth>(&shape_)) return {s->a - s->ramp, s->a, s->b, s->b + s->ramp};
    const auto& t = std::get<Triangle>(shape_);
    return {t.center - t.halfwidth, t.center, t.center + t.halfwidth};
  }

  [[nodiscard]] std::string describe() const {
    char buf[160];
    if (const auto* s = std::get_if<IndicatorSmooth>(&shape_)) {
      std::snprintf(buf, sizeof buf, "indicator(c=%g,a=%g,b=%g,ramp=%g)", s->height, s->a, s->b, s->ramp);
    } else {
      const auto& t = std::get<Triangle>(shape_);
      std::snprintf(buf, sizeof buf, "triangle(center=%g,halfwidth=%g,height=%g)", t.center, t.halfwidth, t.height);
    }
    return buf;
  }

  /// Round-trippable form accepted by parse_test_function.
  [[nodiscard]] std::string to_spec() const {
    using detail::format_real;
    if (const auto* s = std::get_if<IndicatorSmooth>(&shape_)) {
      return "indicator(" + format_real(s->height) + "," + format_real(s->a) + "," + format_real(s->b) + "," +
             format_real(s->ramp) + ")";
    }
    const auto& t = std::get<Triangle>(shape_);
    return "triangle(" + format_real(t.center) + "," + format_real(t.halfwidth) + "," + format_real(t.height) + ")";
  }

  /// Sum of f(x - offset) over a sorted point set, skipping points outside
  /// the (shifted) support.
  [[nodiscard]] double pair(std::span<const double> sorted_points, double offset = 0.0) const {
    const Interval s = support();
    const auto lo = std::lower_bound(sorted_points.begin(), sorted_points.end(), s.lo + offset);
    const auto hi = std::upper_bound(sorted_points.begin(), sorted_points.end(), s.hi + offset);
    double acc = 0.0;
    for (auto it = lo; it != hi; ++it) acc += (*this)(*it - offset);
    return acc;
  }

 private:
  std::variant<IndicatorSmooth, Triangle> shape_;
};

/// "indicator(height,a,b,ramp)" or "triangle(center,halfwidth,height)".
inline TestFunction parse_test_function(std::string_view text) {
  const auto [name, args] = detail::split_call(text);
  const auto parts = detail::split(args, ',');
  std::vector<double> v;
  for (auto p : parts) v.push_back(detail::parse_real(p));
  if (name == "indicator") {
    if (v.size() != 4) throw ArgumentError("indicator(height,a,b,ramp) takes four arguments");
    return IndicatorSmooth{v[0], v[1], v[2], v[3]};
  }
  if (name == "triangle") {
    if (v.size() != 3) throw ArgumentError("triangle(center,halfwidth,height) takes three arguments");
    return Triangle{v[0], v[1], v[2]};
  }
  throw ArgumentError("unknown test function '" + std::string(name) + "'");
}

/// Regular grid t_i = i / (m - 1) on [0, 1].
inline std::vector<double> t_grid(std::size_t m) {
  if (m < 2) throw ArgumentError("t-grid needs at least two points");
  std::vector<double> t(m);
  for (std::size_t i = 0; i < m; ++i) t[i] = static_cast<double>(i) / static_cast<double>(m - 1);
  return t;
}

/// Xi_J: one point |N(J)| |Lambda| (N_J(E_n) - t) per eigenvalue in J.
inline PointSample xi_J(const Spectrum& spectrum, const UnfoldingMap& map, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ArgumentError("t must lie in [0, 1]");
  const auto [first, last] = index_range(spectrum, map.window());
  const double scale = map.mass() * static_cast<double>(spectrum.size());
  PointSample out{{}, t, map.window(), spectrum.realization_index};
  out.points.reserve(last - first);
  for (std::size_t n = first; n < last; ++n) out.points.push_back(scale * (map(spectrum.eigenvalues[n]) - t));
  return out;
}

/// Xi: one point |Lambda| (N(E_n) - t) per eigenvalue of the box.
inline PointSample xi_global(const Spectrum& spectrum, const IdsModel& ids, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ArgumentError("t must lie in [0, 1]");
  const double scale = static_cast<double>(spectrum.size());
  PointSample out{{}, t, ids.range(), spectrum.realization_index};
  out.points.reserve(spectrum.size());
  for (double e : spectrum.eigenvalues) out.points.push_back(scale * (ids(e) - t));
  return out;
}

/// Xi~_J with a precomputed density value nu(t) > 0.
inline PointSample xi_tilde(const Spectrum& spectrum, double density_at_t, Interval window, double t) {
  if (!(density_at_t > 0.0)) throw DegenerateDensityError("xi_tilde needs nu(t) > 0");
  const auto [first, last] = index_range(spectrum, window);
  const double scale = density_at_t * static_cast<double>(spectrum.size());
  PointSample out{{}, t, window, spectrum.realization_index};
  out.points.reserve(last - first);
  for (std::size_t n = first; n < last; ++n) out.points.push_back(scale * (spectrum.eigenvalues[n] - t));
  return out;
}

/// Xi~_J: one point nu(t) |Lambda| (E_n - t) per eigenvalue in J; t is an
/// energy in the interior of J.
inline PointSample xi_tilde(const Spectrum& spectrum, const IdsModel& ids, Interval window, double t) {
  if (!(t > window.lo && t < window.hi)) throw ArgumentError("t must lie in the interior of J");
  return xi_tilde(spectrum, ids.density(t), window, t);
}

/// Trapezoid estimate of int_0^1 exp(-<Xi(t), f>) dt from samples on a
/// t-grid that covers [0, 1]. Samples of several realizations are grouped by
/// realization index and the per-realization estimates averaged.
inline double laplace_functional(std::span<const PointSample> samples, const TestFunction& f) {
  if (samples.empty()) throw ArgumentError("laplace_functional needs a non-empty t-grid");
  // (realization, t, exp(-<Xi, f>))
  std::vector<std::tuple<std::uint64_t, double, double>> rows;
  rows.reserve(samples.size());
  for (const auto& s : samples) {
    double pairing = 0.0;
    if (std::is_sorted(s.points.begin(), s.points.end())) {
      pairing = f.pair(s.points);
    } else {
      for (double p : s.points) pairing += f(p);
    }
    rows.emplace_back(s.realization_index, s.origin_t, std::exp(-pairing));
  }
  std::sort(rows.begin(), rows.end());
  double total = 0.0;
  std::size_t groups = 0;
  for (std::size_t begin = 0; begin < rows.size();) {
    std::size_t end = begin;
    while (end < rows.size() && std::get<0>(rows[end]) == std::get<0>(rows[begin])) ++end;
    if (end - begin < 2 || std::get<1>(rows[begin]) != 0.0 || std::get<1>(rows[end - 1]) != 1.0) {
      throw ArgumentError("t-grid must cover [0, 1] with at least two points");
    }
    double acc = 0.0;
    for (std::size_t i = begin + 1; i < end; ++i) {
      acc += 0.5 * (std::get<1>(rows[i]) - std::get<1>(rows[i - 1])) * (std::get<2>(rows[i]) + std::get<2>(rows[i - 1]));
    }
    total += acc;
    ++groups;
    begin = end;
  }
  return total / static_cast<double>(groups);
}

/// Same estimate for Xi_J of one spectrum without materialising samples.
inline double laplace_functional(const Spectrum& spectrum, const UnfoldingMap& map, const TestFunction& f,
                                 std::span<const double> grid) {
  if (grid.size() < 2 || grid.front() != 0.0 || grid.back() != 1.0) {
    throw ArgumentError("t-grid must cover [0, 1] with at least two points");
  }
  const auto [first, last] = index_range(spectrum, map.window());
  const double scale = map.mass() * static_cast<double>(spectrum.size());
  std::vector<double> u;
  u.reserve(last - first);
  for (std::size_t n = first; n < last; ++n) u.push_back(scale * map(spectrum.eigenvalues[n]));
  double acc = 0.0;
  double prev_t = 0.0;
  double prev_v = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = std::exp(-f.pair(u, scale * grid[i]));
    if (i > 0) acc += 0.5 * (grid[i] - prev_t) * (v + prev_v);
    prev_t = grid[i];
    prev_v = v;
  }
  return acc;
}

namespace detail {

inline double simpson_step(const std::function<double(double)>& g, double a, double b, double fa, double fm,
                           double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = g(lm);
  const double frm = g(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of g on [a, b] to absolute tolerance tol.
inline double adaptive_simpson(const std::function<double(double)>& g, double a, double b, double tol) {
  if (b <= a) return 0.0;
  const double fa = g(a);
  const double fb = g(b);
  const double fm = g(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_step(g, a, b, fa, fm, fb, whole, tol, 50);
}

/// Laplace functional of the intensity-one Poisson process,
/// exp(-int (1 - e^{-f(x)}) dx).
inline double poisson_limit(const TestFunction& f) {
  auto bp = f.breakpoints();
  std::sort(bp.begin(), bp.end());
  const auto g = [&](double x) { return 1.0 - std::exp(-f(x)); };
  double integral = 0.0;
  const double tol = 1e-12 / static_cast<double>(bp.size());
  for (std::size_t i = 1; i < bp.size(); ++i) integral += adaptive_simpson(g, bp[i - 1], bp[i], tol);
  return std::exp(-integral);
}

/// Narrowest energy window centered at e0 whose IDS mass m satisfies
/// m >= |I|^(1 + rho_tilde) and m |Lambda|^(1 - delta) >= threshold.
inline Interval shrinking_window(double e0, const IdsModel& ids, const BoxGeometry& geom, double rho_tilde,
                                 double delta, double threshold = 50.0) {
  const Interval range = ids.range();
  if (!(e0 >= range.lo && e0 <= range.hi)) throw DomainError("window center lies outside the IDS range");
  if (!(delta > 0.0 && delta < 1.0)) throw ArgumentError("delta must lie in (0, 1)");
  if (!(rho_tilde > 0.0)) throw ArgumentError("rho_tilde must be positive");
  const double volume_factor = std::pow(static_cast<double>(geom.site_count()), 1.0 - delta);
  const auto mass = [&](double w) { return ids(e0 + 0.5 * w) - ids(e0 - 0.5 * w); };

  double hi = 2.0 * std::max(e0 - range.lo, range.hi - e0) * (1.0 + 1e-12) + 1e-12;
  if (mass(hi) * volume_factor < threshold) {
    throw InfeasibleWindowError("no window around E0 reaches mass * |Lambda|^(1-delta) >= " + std::to_string(threshold) +
                                    " (maximum " + std::to_string(mass(hi) * volume_factor) + ")",
                                2);
  }
  double lo = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mass(mid) * volume_factor >= threshold) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  const double w = hi;
  if (mass(w) < std::pow(w, 1.0 + rho_tilde)) {
    throw InfeasibleWindowError("window of width " + std::to_string(w) + " has mass " + std::to_string(mass(w)) +
                                    " < |I|^(1+rho_tilde)",
                                1);
  }
  return {e0 - 0.5 * w, e0 + 0.5 * w};
}

}  // namespace anderson
