#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "anderson/eigensolve.hpp"
#include "anderson/errors.hpp"
#include "anderson/geometry.hpp"
#include "anderson/ids.hpp"
#include "anderson/pointprocess.hpp"
#include "anderson/statistics.hpp"

namespace anderson {

/// Relative tolerance defining the argmax set of |phi|.
inline constexpr double kCenterTieTolerance = 1e-12;

/// Among the sites where |phi(x)| is maximal, the lexicographically largest.
inline Site localization_center(std::span<const double> eigenvector, const BoxGeometry& geom) {
  if (eigenvector.size() != geom.site_count()) throw DimensionError("eigenvector does not match the box");
  double peak = 0.0;
  for (double v : eigenvector) peak = std::max(peak, std::abs(v));
  if (!(peak > 0.0)) throw ArgumentError("localization center of a zero vector");
  const double cut = peak * (1.0 - kCenterTieTolerance);
  // Rank order is lexicographic order, so the largest qualifying rank wins.
  std::size_t best = 0;
  for (std::size_t r = 0; r < eigenvector.size(); ++r) {
    if (std::abs(eigenvector[r]) >= cut) best = r;
  }
  return geom.site(best);
}

enum class LocalizationFlag { Localized, Delocalized };

struct LocalizedState {
  double energy = 0.0;
  Site center{0, 0, 0};
  /// Max |phi| over sup-norm shells |x - center| = r, r = 0, 1, ...
  std::vector<double> profile;
  /// Fit log M(r) ~ log C - decay_rate * r^stretch.
  double decay_rate = 0.0;
  double stretch = 1.0;
  LocalizationFlag flag = LocalizationFlag::Delocalized;
};

struct DecayFitOptions {
  /// Shell maxima below floor * M(0) are numerical zeros.
  double floor = 1e-12;
  /// Decay rate reported when every shell beyond the center is at zero.
  double rate_cap = 1e3;
  /// The monotone envelope must fall below exp(-envelope_drop) * M(0) by half
  /// the profile radius, or the state is flagged delocalized.
  double envelope_drop = 2.0;
};

namespace detail {

struct StretchFit {
  double log_c = 0.0;
  double rate = 0.0;
  double sse = std::numeric_limits<double>::infinity();
};

inline StretchFit fit_fixed_stretch(std::span<const double> r, std::span<const double> logm, double stretch) {
  std::vector<double> x(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) x[i] = std::pow(r[i], stretch);
  const LinearFit lf = least_squares(x, logm);
  StretchFit out{lf.intercept, -lf.slope, 0.0};
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double res = logm[i] - (lf.intercept + lf.slope * x[i]);
    out.sse += res * res;
  }
  return out;
}

}  // namespace detail

/// Shell-maximum profile around `center` and a stretched-exponential fit
/// with stretch in (0, 1].
inline LocalizedState decay_profile(std::span<const double> eigenvector, const Site& center, const BoxGeometry& geom,
                                    const DecayFitOptions& opts = {}) {
  if (eigenvector.size() != geom.site_count()) throw DimensionError("eigenvector does not match the box");
  if (!geom.contains(center)) throw ArgumentError("center lies outside the box");
  LocalizedState st;
  st.center = center;
  for (std::size_t rk = 0; rk < eigenvector.size(); ++rk) {
    const auto r = static_cast<std::size_t>(geom.sup_distance(geom.site(rk), center));
    if (r >= st.profile.size()) st.profile.resize(r + 1, 0.0);
    st.profile[r] = std::max(st.profile[r], std::abs(eigenvector[rk]));
  }
  if (st.profile.size() < 4) {
    throw InsufficientProfileError("decay profile has " + std::to_string(st.profile.size()) + " shells, needs 4");
  }
  const double m0 = st.profile.front();
  if (!(m0 > 0.0)) throw ArgumentError("eigenvector vanishes at its center");

  // Monotone (non-increasing) upper envelope screen.
  std::vector<double> envelope(st.profile.size());
  double run = 0.0;
  for (std::size_t r = st.profile.size(); r-- > 0;) {
    run = std::max(run, st.profile[r]);
    envelope[r] = run;
  }
  const std::size_t half = (st.profile.size() - 1) / 2;
  const bool decays = envelope[half] <= std::exp(-opts.envelope_drop) * m0;

  // Fit on shells above numerical zero. Zero shells are skipped, not treated
  // as the end of the profile: bipartite states can vanish on every other shell.
  std::vector<double> rs;
  std::vector<double> logm;
  for (std::size_t r = 0; r < st.profile.size(); ++r) {
    if (st.profile[r] <= opts.floor * m0) continue;
    rs.push_back(static_cast<double>(r));
    logm.push_back(std::log(st.profile[r] / m0));
  }
  if (rs.size() < 3) {
    st.decay_rate = decays ? opts.rate_cap : 0.0;
    st.stretch = 1.0;
    st.flag = decays ? LocalizationFlag::Localized : LocalizationFlag::Delocalized;
    return st;
  }

  detail::StretchFit best;
  double best_stretch = 1.0;
  for (int k = 1; k <= 50; ++k) {
    const double s = 0.02 * k;
    const auto f = detail::fit_fixed_stretch(rs, logm, s);
    if (f.sse < best.sse) {
      best = f;
      best_stretch = s;
    }
  }
  // Golden-section refinement around the best grid point.
  double lo = std::max(1e-3, best_stretch - 0.02);
  double hi = std::min(1.0, best_stretch + 0.02);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 40; ++it) {
    const double a = hi - phi * (hi - lo);
    const double b = lo + phi * (hi - lo);
    if (detail::fit_fixed_stretch(rs, logm, a).sse < detail::fit_fixed_stretch(rs, logm, b).sse) {
      hi = b;
    } else {
      lo = a;
    }
  }
  const double refined = 0.5 * (lo + hi);
  const auto rf = detail::fit_fixed_stretch(rs, logm, refined);
  if (rf.sse <= best.sse) {
    best = rf;
    best_stretch = refined;
  }
  st.decay_rate = best.rate;
  st.stretch = best_stretch;

  st.flag = (decays && st.decay_rate > 0.0) ? LocalizationFlag::Localized : LocalizationFlag::Delocalized;
  return st;
}

/// Eigenvalues in J whose localization center lies in a sub-box.
struct CenterFiltered {
  std::uint64_t realization_index = 0;
  Interval window;
  BoxGeometry subbox;
  /// Ascending, repeated with multiplicity.
  std::vector<double> eigenvalues;
  std::vector<Site> centers;

  /// N^f(J, Lambda, omega)
  [[nodiscard]] std::size_t count() const noexcept { return eigenvalues.size(); }
};

inline CenterFiltered enumerate_centers_in_box(const Spectrum& spectrum, Interval window, const BoxGeometry& subbox) {
  CenterFiltered out{spectrum.realization_index, window, subbox, {}, {}};
  const auto [first, last] = index_range(spectrum, window);
  for (std::size_t n = first; n < last; ++n) {
    const auto col = spectrum.column_of(n);
    if (!col) throw CapabilityError("eigenvector of eigenvalue " + std::to_string(n) + " is not available");
    const Site c = localization_center(spectrum.vector(*col), spectrum.geometry);
    if (subbox.contains(c)) {
      out.eigenvalues.push_back(spectrum.eigenvalues[n]);
      out.centers.push_back(c);
    }
  }
  return out;
}

inline std::vector<CenterFiltered> enumerate_centers_in_box(std::span<const Spectrum> spectra, Interval window,
                                                            const BoxGeometry& subbox) {
  std::vector<CenterFiltered> out;
  out.reserve(spectra.size());
  for (const auto& s : spectra) out.push_back(enumerate_centers_in_box(s, window, subbox));
  return out;
}

/// Xi^f_J: the Xi_J transform applied to center-filtered eigenvalues, with
/// |Lambda| the volume of the sub-box.
inline PointSample xi_f(const CenterFiltered& filtered, const UnfoldingMap& map, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ArgumentError("t must lie in [0, 1]");
  const double scale = map.mass() * static_cast<double>(filtered.subbox.site_count());
  PointSample out{{}, t, map.window(), filtered.realization_index};
  out.points.reserve(filtered.eigenvalues.size());
  for (double e : filtered.eigenvalues) {
    if (map.window().lo <= e && e < map.window().hi) out.points.push_back(scale * (map(e) - t));
  }
  return out;
}

/// Unfolded spacings (Exp(1) scale) of a center-filtered eigenvalue list.
inline std::vector<double> unfolded_spacings(const CenterFiltered& filtered, const UnfoldingMap& map) {
  const double scale = map.mass() * static_cast<double>(filtered.subbox.site_count());
  std::vector<double> out;
  for (std::size_t j = 0; j + 1 < filtered.eigenvalues.size(); ++j) {
    out.push_back(scale * (map(filtered.eigenvalues[j + 1]) - map(filtered.eigenvalues[j])));
  }
  return out;
}

}  // namespace anderson
