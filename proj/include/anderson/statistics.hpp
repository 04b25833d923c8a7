#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "anderson/disorder.hpp"
#include "anderson/eigensolve.hpp"
#include "anderson/errors.hpp"
#include "anderson/ids.hpp"
#include "anderson/rng.hpp"

namespace anderson {

// ---------------------------------------------------------------------------
// Level spacings

/// How consecutive eigenvalues in J are turned into spacings.
enum class SpacingScale {
  /// (|N(J)| / |J|) |Lambda| (E_{j+1} - E_j): mean-density normalization,
  /// whose survival function tends to g_{nu,J}.
  MeanDensity,
  /// |N(J)| |Lambda| (N_J(E_{j+1}) - N_J(E_j)): locally unfolded, tends to Exp(1).
  Unfolded,
};

struct SpacingSample {
  std::vector<double> spacings;
  Interval window;
  /// Number of eigenvalues in J.
  std::size_t count = 0;
};

/// Spacings between consecutive eigenvalues that both lie in J. Returns
/// nullopt when J holds fewer than two eigenvalues.
inline std::optional<SpacingSample> unfolded_spacings(const Spectrum& spectrum, const UnfoldingMap& map,
                                                      SpacingScale scale = SpacingScale::MeanDensity) {
  const auto [first, last] = index_range(spectrum, map.window());
  const std::size_t count = last - first;
  if (count < 2) return std::nullopt;
  const double volume = static_cast<double>(spectrum.size());
  SpacingSample out{{}, map.window(), count};
  out.spacings.reserve(count - 1);
  if (scale == SpacingScale::MeanDensity) {
    const double factor = map.mass() / map.window().length() * volume;
    for (std::size_t j = first; j + 1 < last; ++j) {
      out.spacings.push_back(factor * (spectrum.eigenvalues[j + 1] - spectrum.eigenvalues[j]));
    }
  } else {
    const double factor = map.mass() * volume;
    double prev = map(spectrum.eigenvalues[first]);
    for (std::size_t j = first; j + 1 < last; ++j) {
      const double next = map(spectrum.eigenvalues[j + 1]);
      out.spacings.push_back(factor * (next - prev));
      prev = next;
    }
  }
  return out;
}

inline std::vector<double> pooled_spacings(std::span<const SpacingSample> samples) {
  std::vector<double> all;
  for (const auto& s : samples) all.insert(all.end(), s.spacings.begin(), s.spacings.end());
  std::sort(all.begin(), all.end());
  return all;
}

/// Empirical survival function of pooled spacings at each x: the fraction of
/// spacings >= x.
inline std::vector<double> dls(std::span<const SpacingSample> samples, std::span<const double> x_grid) {
  const std::vector<double> pooled = pooled_spacings(samples);
  if (pooled.empty()) throw ArgumentError("dls needs at least one spacing");
  std::vector<double> out;
  out.reserve(x_grid.size());
  const double n = static_cast<double>(pooled.size());
  for (double x : x_grid) {
    const auto it = std::lower_bound(pooled.begin(), pooled.end(), x);
    out.push_back(static_cast<double>(pooled.end() - it) / n);
  }
  return out;
}

/// int_J exp(-nu_J(l) |J| x) nu_J(l) dl for a density nu_J on J, by the
/// trapezoid rule on `nodes` equispaced points; one value per x.
inline std::vector<double> mixed_exponential_survival(const std::function<double(double)>& nu_j, Interval window,
                                                      std::span<const double> x_grid, std::size_t nodes = 801) {
  if (nodes < 2) throw ArgumentError("quadrature needs at least two nodes");
  const double width = window.length();
  std::vector<double> density(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    // clamp: lo + width can round past hi
    density[i] = nu_j(std::min(window.hi, window.lo + width * static_cast<double>(i) / static_cast<double>(nodes - 1)));
  }
  const double step = width / static_cast<double>(nodes - 1);
  std::vector<double> out;
  out.reserve(x_grid.size());
  for (double x : x_grid) {
    if (x < 0) throw ArgumentError("g_nu_J needs x >= 0");
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes; ++i) {
      const double w = (i == 0 || i + 1 == nodes) ? 0.5 : 1.0;
      acc += w * std::exp(-density[i] * width * x) * density[i];
    }
    out.push_back(acc * step);
  }
  return out;
}

/// g_{nu,J}(x) using the estimated nu_J of an unfolding map.
inline std::vector<double> g_nu_J(const UnfoldingMap& map, std::span<const double> x_grid, std::size_t nodes = 801) {
  return mixed_exponential_survival([&](double l) { return nu_J(map, l); }, map.window(), x_grid, nodes);
}

inline double g_nu_J(const UnfoldingMap& map, double x) {
  const double xs[1] = {x};
  return g_nu_J(map, xs).front();
}

// ---------------------------------------------------------------------------
// Goodness of fit

/// sup |F_n - F| for a sorted sample, evaluated exactly at the jumps.
inline double ks_statistic(std::span<const double> sorted_sample, const std::function<double(double)>& cdf) {
  if (sorted_sample.empty()) throw ArgumentError("ks_statistic needs a non-empty sample");
  if (!std::is_sorted(sorted_sample.begin(), sorted_sample.end())) throw ArgumentError("ks_statistic needs sorted input");
  const double n = static_cast<double>(sorted_sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted_sample.size(); ++i) {
    const double f = cdf(sorted_sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/// Two-sample statistic sup |F_a - F_b| over sorted samples.
inline double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ArgumentError("ks_two_sample needs non-empty samples");
  if (!std::is_sorted(a.begin(), a.end()) || !std::is_sorted(b.begin(), b.end())) {
    throw ArgumentError("ks_two_sample needs sorted input");
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// Asymptotic Kolmogorov survival P(K > lambda).
inline double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// Asymptotic critical value of sqrt(n) D at significance alpha.
inline double ks_critical(double alpha) {
  double lo = 0.2;
  double hi = 5.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (kolmogorov_survival(mid) > alpha) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Small numerical helpers

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

inline LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ArgumentError("least squares needs >= 2 paired points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw ArgumentError("least squares needs distinct abscissae");
  return {sxy / sxx, my - sxy / sxx * mx};
}

/// Value with a symmetric confidence half-width.
struct Estimate {
  double value = 0.0;
  double half_width = 0.0;
};

/// Half-width of the central 95% bootstrap interval of `statistic` over
/// resamples (with replacement) of `n` units.
inline double bootstrap_half_width(std::size_t n, std::size_t resamples, std::uint64_t seed,
                                   const std::function<double(std::span<const std::size_t>)>& statistic) {
  if (n == 0 || resamples < 2) return 0.0;
  CounterStream stream(seed, streams::kBootstrap);
  std::vector<double> values;
  values.reserve(resamples);
  std::vector<std::size_t> pick(n);
  for (std::size_t b = 0; b < resamples; ++b) {
    for (auto& p : pick) p = stream.below(n);
    const double v = statistic(pick);
    if (std::isfinite(v)) values.push_back(v);
  }
  if (values.size() < 2) return 0.0;
  std::sort(values.begin(), values.end());
  const auto at = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double w = pos - static_cast<double>(i);
    return i + 1 < values.size() ? values[i] * (1 - w) + values[i + 1] * w : values.back();
  };
  return 0.5 * (at(0.975) - at(0.025));
}

// ---------------------------------------------------------------------------
// Wegner / Minami moment scaling

struct ScalingReport {
  std::vector<double> widths;
  /// |J| |Lambda|
  std::vector<double> abscissae;
  /// E[tr 1_J(H)]
  std::vector<double> first_moments;
  /// E[tr 1_J(H) (tr 1_J(H) - 1)]
  std::vector<double> second_factorial_moments;
  Estimate wegner_slope;
  Estimate minami_slope;
};

struct ScanOptions {
  std::size_t placements = 64;
  std::size_t bootstrap_resamples = 500;
  std::uint64_t seed = 1;
};

/// Monte Carlo first and second factorial moments of the eigenvalue count in
/// windows J of each width placed uniformly inside I, averaged over the
/// ensemble and the placements, with log-log slopes against |J|.
inline ScalingReport wegner_minami_scan(std::span<const Spectrum> ensemble, Interval region,
                                        std::span<const double> widths, const ScanOptions& opts = {}) {
  if (ensemble.empty()) throw ArgumentError("wegner_minami_scan needs a non-empty ensemble");
  for (double w : widths) {
    if (!(w > 0.0)) throw ArgumentError("window widths must be positive");
    if (w > region.length()) throw ArgumentError("window width exceeds the region I");
  }
  const std::size_t nr = ensemble.size();
  const std::size_t nw = widths.size();
  // Per realization, per width: placement-averaged k and k(k-1).
  std::vector<double> k1(nr * nw, 0.0);
  std::vector<double> k2(nr * nw, 0.0);
  for (std::size_t w = 0; w < nw; ++w) {
    CounterStream placement(opts.seed, streams::kPlacement + w);
    std::vector<double> lows(opts.placements);
    for (double& lo : lows) lo = region.lo + placement.uniform() * (region.length() - widths[w]);
    for (std::size_t r = 0; r < nr; ++r) {
      double s1 = 0.0;
      double s2 = 0.0;
      for (double lo : lows) {
        const auto k = static_cast<double>(count_in_interval(ensemble[r], {lo, lo + widths[w]}));
        s1 += k;
        s2 += k * (k - 1.0);
      }
      k1[r * nw + w] = s1 / static_cast<double>(lows.size());
      k2[r * nw + w] = s2 / static_cast<double>(lows.size());
    }
  }

  const double volume = static_cast<double>(ensemble.front().size());
  ScalingReport rep;
  rep.widths.assign(widths.begin(), widths.end());
  const auto moments = [&](std::span<const std::size_t> pick, std::vector<double>& m1, std::vector<double>& m2) {
    m1.assign(nw, 0.0);
    m2.assign(nw, 0.0);
    for (std::size_t r : pick) {
      for (std::size_t w = 0; w < nw; ++w) {
        m1[w] += k1[r * nw + w];
        m2[w] += k2[r * nw + w];
      }
    }
    for (std::size_t w = 0; w < nw; ++w) {
      m1[w] /= static_cast<double>(pick.size());
      m2[w] /= static_cast<double>(pick.size());
    }
  };
  const auto slope = [&](const std::vector<double>& m) {
    std::vector<double> lx;
    std::vector<double> ly;
    for (std::size_t w = 0; w < nw; ++w) {
      if (m[w] > 0.0) {
        lx.push_back(std::log(widths[w]));
        ly.push_back(std::log(m[w]));
      }
    }
    if (lx.size() < 2) return std::nan("");
    return least_squares(lx, ly).slope;
  };

  std::vector<std::size_t> all(nr);
  std::iota(all.begin(), all.end(), std::size_t{0});
  moments(all, rep.first_moments, rep.second_factorial_moments);
  for (double w : widths) rep.abscissae.push_back(w * volume);
  rep.wegner_slope.value = slope(rep.first_moments);
  rep.minami_slope.value = slope(rep.second_factorial_moments);

  std::vector<double> m1;
  std::vector<double> m2;
  rep.wegner_slope.half_width = bootstrap_half_width(nr, opts.bootstrap_resamples, opts.seed, [&](auto pick) {
    moments(pick, m1, m2);
    return slope(m1);
  });
  rep.minami_slope.half_width = bootstrap_half_width(nr, opts.bootstrap_resamples, opts.seed + 1, [&](auto pick) {
    moments(pick, m1, m2);
    return slope(m2);
  });
  return rep;
}

/// Exact moments for a one-site box: tr 1_J(H) = 1{lambda omega in J}.
struct SingleSiteMoments {
  double first = 0.0;
  double second_factorial = 0.0;
};

inline SingleSiteMoments single_site_moments(const DisorderModel& model, Interval window) {
  const double lam = model.coupling();
  if (lam == 0.0) return {(window.lo <= 0.0 && 0.0 < window.hi) ? 1.0 : 0.0, 0.0};
  const Density& g = model.density();
  return {g.cdf(window.hi / lam) - g.cdf(window.lo / lam), 0.0};
}

// ---------------------------------------------------------------------------
// Eigenvalue-count fluctuations

struct CountFluctuation {
  Interval window;
  /// |N(J)| |Lambda| from the IDS model.
  double expected = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  Estimate mean_ratio;
  Estimate dispersion;  // variance / mean
  std::vector<double> thresholds;
  /// P(|N / (|N(J)| |Lambda|) - 1| >= threshold)
  std::vector<double> exceedance;
};

/// Fluctuation statistics of one window from per-realization counts.
inline CountFluctuation count_fluctuation(Interval window, std::span<const double> counts, double expected,
                                          std::span<const double> thresholds, std::size_t bootstrap_resamples = 500,
                                          std::uint64_t seed = 1) {
  if (counts.empty()) throw ArgumentError("count statistics need at least one realization");
  if (!(expected > 0.0)) throw DegenerateWindowError("count window carries no IDS mass");
  CountFluctuation cf;
  cf.window = window;
  cf.expected = expected;
  const auto stats = [&](std::span<const std::size_t> pick, double& mean, double& var) {
    double s = 0.0;
    for (auto p : pick) s += counts[p];
    mean = s / static_cast<double>(pick.size());
    double v = 0.0;
    for (auto p : pick) v += (counts[p] - mean) * (counts[p] - mean);
    var = pick.size() > 1 ? v / static_cast<double>(pick.size() - 1) : 0.0;
  };
  std::vector<std::size_t> all(counts.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  stats(all, cf.mean, cf.variance);
  cf.mean_ratio.value = cf.mean / expected;
  cf.dispersion.value = cf.mean > 0.0 ? cf.variance / cf.mean : 0.0;
  cf.mean_ratio.half_width = bootstrap_half_width(counts.size(), bootstrap_resamples, seed, [&](auto pick) {
    double m = 0.0;
    double v = 0.0;
    stats(pick, m, v);
    return m / expected;
  });
  cf.dispersion.half_width = bootstrap_half_width(counts.size(), bootstrap_resamples, seed + 1, [&](auto pick) {
    double m = 0.0;
    double v = 0.0;
    stats(pick, m, v);
    return m > 0.0 ? v / m : 0.0;
  });
  cf.thresholds.assign(thresholds.begin(), thresholds.end());
  for (double th : thresholds) {
    std::size_t hits = 0;
    for (double c : counts) {
      if (std::abs(c / expected - 1.0) >= th) ++hits;
    }
    cf.exceedance.push_back(static_cast<double>(hits) / static_cast<double>(counts.size()));
  }
  return cf;
}

inline std::vector<CountFluctuation> count_fluctuations(std::span<const Spectrum> ensemble, const IdsModel& ids,
                                                        std::span<const Interval> windows,
                                                        std::span<const double> thresholds,
                                                        std::size_t bootstrap_resamples = 500,
                                                        std::uint64_t seed = 1) {
  if (ensemble.empty()) throw ArgumentError("count_fluctuations needs a non-empty ensemble");
  std::vector<CountFluctuation> out;
  const double volume = static_cast<double>(ensemble.front().size());
  for (std::size_t wi = 0; wi < windows.size(); ++wi) {
    const Interval& j = windows[wi];
    std::vector<double> counts;
    counts.reserve(ensemble.size());
    for (const auto& s : ensemble) counts.push_back(static_cast<double>(count_in_interval(s, j)));
    const double mass = ids(j.hi) - ids(j.lo);
    out.push_back(count_fluctuation(j, counts, mass * volume, thresholds, bootstrap_resamples, seed + 2 * wi));
  }
  return out;
}

}  // namespace anderson
