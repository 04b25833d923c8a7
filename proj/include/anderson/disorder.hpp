#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "anderson/errors.hpp"
#include "anderson/geometry.hpp"
#include "anderson/rng.hpp"

namespace anderson {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  [[nodiscard]] double length() const noexcept { return hi - lo; }
  [[nodiscard]] double center() const noexcept { return 0.5 * (lo + hi); }
  [[nodiscard]] bool contains(double x) const noexcept { return lo <= x && x <= hi; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Uniform density on [a, b].
struct UniformOn {
  double a = 0.0;
  double b = 1.0;
};

/// Density that is linear between consecutive knots and zero outside them.
struct PiecewiseLinear {
  std::vector<std::pair<double, double>> knots;  // (x, g(x)), x strictly increasing
};

/// Compactly supported bounded single-site density with exact inverse-CDF
/// sampling.
class Density {
 public:
  Density(UniformOn u) : spec_(u) {  // NOLINT(google-explicit-constructor)
    if (!(u.b > u.a)) throw ArgumentError("uniform density needs a < b");
  }

  Density(PiecewiseLinear p) : spec_(std::move(p)) {  // NOLINT(google-explicit-constructor)
    const auto& k = std::get<PiecewiseLinear>(spec_).knots;
    if (k.size() < 2) throw ArgumentError("piecewise-linear density needs at least two knots");
    cumulative_.assign(k.size(), 0.0);
    for (std::size_t i = 0; i < k.size(); ++i) {
      if (!(k[i].second >= 0.0) || !std::isfinite(k[i].second)) {
        throw ArgumentError("density values must be finite and non-negative");
      }
      if (i > 0) {
        if (!(k[i].first > k[i - 1].first)) throw ArgumentError("density knots must be strictly increasing");
        cumulative_[i] = cumulative_[i - 1] + 0.5 * (k[i].second + k[i - 1].second) * (k[i].first - k[i - 1].first);
      }
    }
    if (std::abs(cumulative_.back() - 1.0) > 1e-12) {
      throw ArgumentError("density must integrate to 1 (got " + std::to_string(cumulative_.back()) + ")");
    }
  }

  /// Rescales the knot values so that the density integrates to one.
  static Density normalized(PiecewiseLinear p) {
    double mass = 0.0;
    for (std::size_t i = 1; i < p.knots.size(); ++i) {
      mass += 0.5 * (p.knots[i].second + p.knots[i - 1].second) * (p.knots[i].first - p.knots[i - 1].first);
    }
    if (!(mass > 0.0)) throw ArgumentError("density has zero mass");
    for (auto& kv : p.knots) kv.second /= mass;
    return Density(std::move(p));
  }

  [[nodiscard]] Interval support() const {
    if (const auto* u = std::get_if<UniformOn>(&spec_)) return {u->a, u->b};
    const auto& k = std::get<PiecewiseLinear>(spec_).knots;
    return {k.front().first, k.back().first};
  }

  [[nodiscard]] double pdf(double x) const {
    if (const auto* u = std::get_if<UniformOn>(&spec_)) {
      return (x >= u->a && x <= u->b) ? 1.0 / (u->b - u->a) : 0.0;
    }
    const auto& k = std::get<PiecewiseLinear>(spec_).knots;
    if (x < k.front().first || x > k.back().first) return 0.0;
    const std::size_t i = segment(x);
    const double w = (x - k[i].first) / (k[i + 1].first - k[i].first);
    return k[i].second + w * (k[i + 1].second - k[i].second);
  }

  [[nodiscard]] double cdf(double x) const {
    if (const auto* u = std::get_if<UniformOn>(&spec_)) {
      return std::clamp((x - u->a) / (u->b - u->a), 0.0, 1.0);
    }
    const auto& k = std::get<PiecewiseLinear>(spec_).knots;
    if (x <= k.front().first) return 0.0;
    if (x >= k.back().first) return 1.0;
    const std::size_t i = segment(x);
    const double dx = x - k[i].first;
    const double slope = (k[i + 1].second - k[i].second) / (k[i + 1].first - k[i].first);
    return std::min(1.0, cumulative_[i] + k[i].second * dx + 0.5 * slope * dx * dx);
  }

  /// Quantile function on (0, 1). Closed form for the uniform case, bisection
  /// on the piecewise-quadratic CDF otherwise.
  [[nodiscard]] double inverse_cdf(double p) const {
    if (const auto* u = std::get_if<UniformOn>(&spec_)) return u->a + p * (u->b - u->a);
    const auto& k = std::get<PiecewiseLinear>(spec_).knots;
    if (p <= 0.0) return k.front().first;
    if (p >= 1.0) return k.back().first;
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), p);
    std::size_t i = static_cast<std::size_t>(std::distance(cumulative_.begin(), it));
    i = std::clamp<std::size_t>(i, 1, k.size() - 1) - 1;
    double lo = k[i].first;
    double hi = k[i + 1].first;
    while (hi - lo > 1e-14 * std::max(1.0, std::abs(lo))) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (cdf(mid) < p) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  }

  [[nodiscard]] bool is_uniform() const noexcept { return std::holds_alternative<UniformOn>(spec_); }
  [[nodiscard]] const std::variant<UniformOn, PiecewiseLinear>& spec() const noexcept { return spec_; }

  /// Canonical text form, as used in experiment configs.
  [[nodiscard]] std::string to_string() const;

 private:
  [[nodiscard]] std::size_t segment(double x) const {
    const auto& k = std::get<PiecewiseLinear>(spec_).knots;
    auto it = std::upper_bound(k.begin(), k.end(), x,
                               [](double v, const std::pair<double, double>& kv) { return v < kv.first; });
    std::size_t i = static_cast<std::size_t>(std::distance(k.begin(), it));
    return std::clamp<std::size_t>(i, 1, k.size() - 1) - 1;
  }

  std::variant<UniformOn, PiecewiseLinear> spec_;
  std::vector<double> cumulative_;
};

namespace detail {
/// Shortest representation that round-trips.
inline std::string format_real(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}
}  // namespace detail

inline std::string Density::to_string() const {
  if (const auto* u = std::get_if<UniformOn>(&spec_)) {
    return "uniform(" + detail::format_real(u->a) + "," + detail::format_real(u->b) + ")";
  }
  std::string out = "piecewise_linear(";
  const auto& k = std::get<PiecewiseLinear>(spec_).knots;
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (i) out += ",";
    out += detail::format_real(k[i].first) + ":" + detail::format_real(k[i].second);
  }
  return out + ")";
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_real(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ArgumentError("not a finite number: '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

/// "name(args)" -> {name, args}; throws when the shape does not match.
inline std::pair<std::string_view, std::string_view> split_call(std::string_view s) {
  s = trim(s);
  const auto open = s.find('(');
  if (open == std::string_view::npos || s.empty() || s.back() != ')') {
    throw ArgumentError("expected name(arguments), got '" + std::string(s) + "'");
  }
  return {trim(s.substr(0, open)), s.substr(open + 1, s.size() - open - 2)};
}

}  // namespace detail

/// Inverse of Density::to_string: "uniform(a,b)" or
/// "piecewise_linear(x0:g0,x1:g1,...)".
inline Density parse_density(std::string_view text) {
  const auto [name, args] = detail::split_call(text);
  const auto parts = detail::split(args, ',');
  if (name == "uniform") {
    if (parts.size() != 2) throw ArgumentError("uniform(a,b) takes two arguments");
    return Density(UniformOn{detail::parse_real(parts[0]), detail::parse_real(parts[1])});
  }
  if (name == "piecewise_linear") {
    PiecewiseLinear p;
    for (auto part : parts) {
      const auto colon = part.find(':');
      if (colon == std::string_view::npos) throw ArgumentError("piecewise_linear knots are written x:g");
      p.knots.emplace_back(detail::parse_real(part.substr(0, colon)), detail::parse_real(part.substr(colon + 1)));
    }
    return Density(std::move(p));
  }
  throw ArgumentError("unknown density '" + std::string(name) + "'");
}

/// Single-site law, coupling and master seed of the random potential.
class DisorderModel {
 public:
  DisorderModel(Density density, double coupling, std::uint64_t master_seed)
      : density_(std::move(density)), coupling_(coupling), seed_(master_seed) {
    // Zero coupling is accepted as the free-Laplacian control.
    if (!(coupling >= 0.0) || !std::isfinite(coupling)) {
      throw ArgumentError("coupling constant must be finite and non-negative");
    }
  }

  [[nodiscard]] const Density& density() const noexcept { return density_; }
  [[nodiscard]] double coupling() const noexcept { return coupling_; }
  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

 private:
  Density density_;
  double coupling_;
  std::uint64_t seed_;
};

/// i.i.d. site values omega_n (unscaled by the coupling). Site n of
/// realization k draws from the counter key (seed, k, rank(n)).
inline std::vector<double> sample_potential(const DisorderModel& model, const BoxGeometry& geom,
                                            std::uint64_t realization_index) {
  std::vector<double> omega(geom.site_count());
  for (std::size_t r = 0; r < omega.size(); ++r) {
    const std::uint64_t bits = counter_bits(model.seed(), streams::kPotential + realization_index, r);
    omega[r] = model.density().inverse_cdf(to_unit_open(bits));
  }
  return omega;
}

/// Almost-sure spectrum [-2d, 2d] + coupling * supp g.
inline Interval almost_sure_spectrum(const DisorderModel& model, const BoxGeometry& geom) {
  const Interval s = model.density().support();
  const double band = 2.0 * geom.dimension();
  const double lam = model.coupling();
  return {-band + lam * s.lo, band + lam * s.hi};
}

}  // namespace anderson
