#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "anderson/disorder.hpp"
#include "anderson/eigensolve.hpp"
#include "anderson/errors.hpp"

namespace anderson {

/// Silverman's rule 1.06 * sigma * m^(-1/5) over a sample.
inline double silverman_bandwidth(std::span<const double> sample) {
  const auto m = static_cast<double>(sample.size());
  if (sample.size() < 2) return 1.0;
  const double mean = std::accumulate(sample.begin(), sample.end(), 0.0) / m;
  double var = 0.0;
  for (double x : sample) var += (x - mean) * (x - mean);
  const double sigma = std::sqrt(var / (m - 1.0));
  return 1.06 * std::max(sigma, 1e-12) * std::pow(m, -0.2);
}

/// Monotone estimate of the integrated density of states.
///
/// N(E) is the pooled empirical distribution function stored at the
/// distinct eigenvalues (knots) and linearly interpolated in between: 0
/// below the first knot, 1 from the last knot on. The density is the exact
/// derivative of N convolved with a Gaussian of width `bandwidth`. Near the
/// band edges part of the kernel mass falls outside the knot range, so the
/// density integrates to slightly less than one over that range.
class IdsModel {
 public:
  /// Direct construction from a table (synthetic models in tests).
  IdsModel(std::vector<double> knots, std::vector<double> values, std::size_t pooled_count, double bandwidth)
      : knots_(std::move(knots)), values_(std::move(values)), pooled_count_(pooled_count), bandwidth_(bandwidth) {
    if (knots_.empty() || knots_.size() != values_.size()) throw ArgumentError("IDS table needs matching knots and values");
    if (!(bandwidth_ > 0.0)) throw ArgumentError("IDS bandwidth must be positive");
    for (std::size_t i = 1; i < knots_.size(); ++i) {
      if (!(knots_[i] > knots_[i - 1])) throw ArgumentError("IDS knots must be strictly increasing");
      if (values_[i] < values_[i - 1]) throw ArgumentError("IDS values must be non-decreasing");
    }
  }

  [[nodiscard]] const std::vector<double>& knots() const noexcept { return knots_; }
  [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }
  [[nodiscard]] std::size_t pooled_count() const noexcept { return pooled_count_; }
  [[nodiscard]] double bandwidth() const noexcept { return bandwidth_; }
  [[nodiscard]] Interval range() const noexcept { return {knots_.front(), knots_.back()}; }

  [[nodiscard]] IdsModel with_bandwidth(double h) const { return {knots_, values_, pooled_count_, h}; }

  /// N(E).
  [[nodiscard]] double operator()(double e) const noexcept {
    if (e < knots_.front()) return 0.0;
    if (e >= knots_.back()) return values_.back();
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), e);
    const std::size_t i = static_cast<std::size_t>(it - knots_.begin()) - 1;
    const double w = (e - knots_[i]) / (knots_[i + 1] - knots_[i]);
    return values_[i] + w * (values_[i + 1] - values_[i]);
  }

  /// nu(E) >= 0; E must lie in the knot range.
  [[nodiscard]] double density(double e) const {
    if (!(e >= knots_.front() && e <= knots_.back())) {
      throw DomainError("density requested at E = " + std::to_string(e) + " outside the IDS knot range");
    }
    return smoothed_derivative(e);
  }

 private:
  [[nodiscard]] double smoothed_derivative(double e) const {
    constexpr double cutoff = 7.0;
    const double h = bandwidth_;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    const auto phi_cdf = [&](double u) { return 0.5 * std::erfc(-u * inv_sqrt2); };
    double acc = 0.0;
    // Jump at the first knot.
    {
      const double u = (e - knots_.front()) / h;
      if (std::abs(u) < cutoff) acc += values_.front() * std::exp(-0.5 * u * u) / (h * std::sqrt(2.0 * std::numbers::pi));
    }
    // Piecewise-constant slopes between knots.
    const auto first = std::lower_bound(knots_.begin(), knots_.end(), e - cutoff * h);
    const auto last = std::upper_bound(knots_.begin(), knots_.end(), e + cutoff * h);
    std::size_t i = first == knots_.begin() ? 0 : static_cast<std::size_t>(first - knots_.begin()) - 1;
    const std::size_t end = std::min(static_cast<std::size_t>(last - knots_.begin()), knots_.size() - 1);
    double prev = phi_cdf((e - knots_[i]) / h);
    for (; i < end; ++i) {
      const double next = phi_cdf((e - knots_[i + 1]) / h);
      const double slope = (values_[i + 1] - values_[i]) / (knots_[i + 1] - knots_[i]);
      acc += slope * (prev - next);
      prev = next;
    }
    return std::max(acc, 0.0);
  }

  std::vector<double> knots_;
  std::vector<double> values_;
  std::size_t pooled_count_;
  double bandwidth_;
};

/// Pooled empirical IDS of an ensemble sharing one geometry.
inline IdsModel fit_ids(std::span<const Spectrum> spectra, double bandwidth = 0.0) {
  if (spectra.empty()) throw ArgumentError("fit_ids needs at least one spectrum");
  std::vector<double> pooled;
  for (const auto& s : spectra) {
    if (!(s.geometry == spectra.front().geometry)) throw ArgumentError("fit_ids: spectra must share one geometry");
    pooled.insert(pooled.end(), s.eigenvalues.begin(), s.eigenvalues.end());
  }
  if (pooled.empty()) throw ArgumentError("fit_ids: spectra are empty");
  std::sort(pooled.begin(), pooled.end());
  const double m = static_cast<double>(pooled.size());
  std::vector<double> knots;
  std::vector<double> values;
  knots.reserve(pooled.size());
  values.reserve(pooled.size());
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    if (i + 1 < pooled.size() && pooled[i + 1] == pooled[i]) continue;
    knots.push_back(pooled[i]);
    values.push_back(static_cast<double>(i + 1) / m);
  }
  const double h = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(pooled);
  return {std::move(knots), std::move(values), pooled.size(), h};
}

inline IdsModel fit_ids(const std::vector<Spectrum>& spectra, double bandwidth = 0.0) {
  return fit_ids(std::span<const Spectrum>(spectra), bandwidth);
}

/// Unfolding map N_J(E) = (N(E) - N(a)) / |N(J)| on J = [a, b].
class UnfoldingMap {
 public:
  UnfoldingMap(std::shared_ptr<const IdsModel> ids, Interval window)
      : ids_(std::move(ids)), window_(window) {
    if (!ids_) throw ArgumentError("unfolding map needs an IDS model");
    if (!(window_.lo <= window_.hi)) throw ArgumentError("window must satisfy a <= b");
    n_lo_ = (*ids_)(window_.lo);
    mass_ = (*ids_)(window_.hi) - n_lo_;
    if (!(mass_ > 1e-6)) {
      throw DegenerateWindowError("window [" + std::to_string(window_.lo) + ", " + std::to_string(window_.hi) +
                                  "] carries IDS mass " + std::to_string(mass_) +
                                  "; unfolding needs |N(J)| > 0");
    }
  }

  [[nodiscard]] const IdsModel& ids() const noexcept { return *ids_; }
  [[nodiscard]] std::shared_ptr<const IdsModel> ids_ptr() const noexcept { return ids_; }
  [[nodiscard]] const Interval& window() const noexcept { return window_; }
  /// |N(J)|.
  [[nodiscard]] double mass() const noexcept { return mass_; }

  [[nodiscard]] double operator()(double e) const noexcept {
    const double x = std::clamp(e, window_.lo, window_.hi);
    return ((*ids_)(x)-n_lo_) / mass_;
  }

  /// Inverse map on [0, 1] (bisection; N_J is non-decreasing).
  [[nodiscard]] double inverse(double u) const {
    double lo = window_.lo;
    double hi = window_.hi;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
      const double mid = 0.5 * (lo + hi);
      if ((*this)(mid) < u) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  }

 private:
  std::shared_ptr<const IdsModel> ids_;
  Interval window_;
  double n_lo_ = 0.0;
  double mass_ = 0.0;
};

inline UnfoldingMap unfold(std::shared_ptr<const IdsModel> ids, Interval window) {
  return {std::move(ids), window};
}

/// Unfolded density nu_J(t) = nu(t) / |N(J)| for t in J.
inline double nu_J(const UnfoldingMap& map, double t) {
  if (!map.window().contains(t)) throw DomainError("nu_J evaluated outside its window");
  return map.ids().density(t) / map.mass();
}

/// Energy window around e0 carrying IDS mass `mass`, split evenly on both
/// sides of e0 where the spectrum allows.
inline Interval mass_centered_window(const IdsModel& ids, double e0, double mass) {
  if (!(mass > 0.0 && mass <= 1.0)) throw ArgumentError("window mass must lie in (0, 1]");
  const double n0 = ids(e0);
  const double lo_target = std::clamp(n0 - 0.5 * mass, 0.0, 1.0 - mass);
  const double hi_target = lo_target + mass;
  const auto quantile = [&](double p) {
    double lo = ids.range().lo;
    double hi = ids.range().hi;
    for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (ids(mid) < p) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return hi;
  };
  return {quantile(lo_target), quantile(hi_target)};
}

}  // namespace anderson
