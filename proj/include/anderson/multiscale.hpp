#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "anderson/eigensolve.hpp"
#include "anderson/errors.hpp"
#include "anderson/geometry.hpp"
#include "anderson/hamiltonian.hpp"
#include "anderson/ids.hpp"
#include "anderson/localization.hpp"
#include "anderson/statistics.hpp"

namespace anderson {

/// Disjoint cells of side ell on a regular grid inside a parent box, with at
/// least `buffer` sites between neighbouring cells and between a cell and the
/// parent boundary.
struct CubeDecomposition {
  BoxGeometry parent;
  int cell_side = 0;
  int buffer = 0;
  int cells_per_axis = 0;
  std::vector<BoxGeometry> cells;

  [[nodiscard]] std::size_t covered_volume() const noexcept {
    std::size_t v = 0;
    for (const auto& c : cells) v += c.site_count();
    return v;
  }
  [[nodiscard]] std::size_t uncovered_volume() const noexcept { return parent.site_count() - covered_volume(); }

  /// Index of the cell containing s, if any.
  [[nodiscard]] std::optional<std::size_t> cell_of(const Site& s) const {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].contains(s)) return i;
    }
    return std::nullopt;
  }
};

inline CubeDecomposition decompose(const BoxGeometry& parent, int cell_side, int buffer) {
  if (cell_side < 1 || buffer < 0) throw ArgumentError("cell side must be >= 1 and buffer >= 0");
  if (buffer >= cell_side) throw ArgumentError("buffer must be smaller than the cell side");
  const int side = parent.side();
  if (cell_side + buffer > side) {
    throw GeometryError("cell side " + std::to_string(cell_side) + " plus buffer " + std::to_string(buffer) +
                        " exceeds the box side " + std::to_string(side));
  }
  // Layout per axis: buffer, then k repetitions of (cell, buffer).
  const int k = (side - buffer) / (cell_side + buffer);
  if (k < 1) throw GeometryError("no cell fits with the requested buffer");
  const int leftover = side - buffer - k * (cell_side + buffer);
  const int start = buffer + leftover / 2;

  CubeDecomposition out{parent, cell_side, buffer, k, {}};
  const int d = parent.dimension();
  std::size_t total = 1;
  for (int i = 0; i < d; ++i) total *= static_cast<std::size_t>(k);
  out.cells.reserve(total);
  for (std::size_t c = 0; c < total; ++c) {
    Site origin{0, 0, 0};
    std::size_t rest = c;
    for (int i = d - 1; i >= 0; --i) {
      const int j = static_cast<int>(rest % static_cast<std::size_t>(k));
      rest /= static_cast<std::size_t>(k);
      origin[i] = parent.origin()[i] + start + j * (cell_side + buffer);
    }
    out.cells.push_back(BoxGeometry::cube(d, origin, cell_side, Boundary::Dirichlet));
  }
  return out;
}

/// The concentric cube of side (side - buffer) inside a cell.
inline BoxGeometry eroded(const BoxGeometry& cell, int buffer) {
  if (buffer < 0 || buffer >= cell.side()) throw ArgumentError("erosion must leave a non-empty cube");
  Site origin = cell.origin();
  for (int i = 0; i < cell.dimension(); ++i) origin[i] += buffer / 2;
  return BoxGeometry::cube(cell.dimension(), origin, cell.side() - buffer, cell.boundary());
}

/// Sites of a cell at sup-distance >= margin from every site outside it.
inline BoxGeometry interior(const BoxGeometry& cell, int margin) {
  if (margin < 1) return cell;
  const int side = cell.side() - 2 * (margin - 1);
  if (side < 1) throw ArgumentError("interior margin leaves an empty cube");
  Site origin = cell.origin();
  for (int i = 0; i < cell.dimension(); ++i) origin[i] += margin - 1;
  return BoxGeometry::cube(cell.dimension(), origin, side, cell.boundary());
}

/// X = 1 iff the cell operator has exactly one eigenvalue in I and its
/// localization center lies in the cell eroded by `buffer`.
inline int bernoulli_X(const Spectrum& cell_spectrum, Interval window, int buffer) {
  const auto [first, last] = index_range(cell_spectrum, window);
  if (last - first != 1) return 0;
  const auto col = cell_spectrum.column_of(first);
  if (!col) throw CapabilityError("eigenvector of the single eigenvalue in I is not available");
  const Site c = localization_center(cell_spectrum.vector(*col), cell_spectrum.geometry);
  return eroded(cell_spectrum.geometry, buffer).contains(c) ? 1 : 0;
}

/// Law of N_I(E) for the unique eigenvalue E of a cell, conditioned on X = 1.
struct ConditionedSample {
  std::vector<double> unfolded;
  std::size_t cells = 0;
  std::size_t successes = 0;
  /// False when fewer than kMinConditioned values were pooled; ks_uniform is
  /// then NaN.
  bool sufficient = false;
  double ks_uniform = std::numeric_limits<double>::quiet_NaN();
};

inline constexpr std::size_t kMinConditioned = 30;

inline ConditionedSample conditioned_unfolded_distribution(std::span<const Spectrum> cell_spectra,
                                                           const UnfoldingMap& map, int buffer) {
  ConditionedSample out;
  for (const auto& s : cell_spectra) {
    ++out.cells;
    if (bernoulli_X(s, map.window(), buffer) == 1) {
      ++out.successes;
      const auto [first, last] = index_range(s, map.window());
      out.unfolded.push_back(map(s.eigenvalues[first]));
    }
  }
  std::sort(out.unfolded.begin(), out.unfolded.end());
  out.sufficient = out.unfolded.size() >= kMinConditioned;
  if (out.sufficient) out.ks_uniform = ks_statistic(out.unfolded, [](double u) { return std::clamp(u, 0.0, 1.0); });
  return out;
}

struct MatchedPair {
  std::size_t parent_index = 0;
  std::size_t cell = 0;
  std::size_t cell_index = 0;
  double parent_energy = 0.0;
  double cell_energy = 0.0;
};

struct MatchReport {
  std::vector<MatchedPair> pairs;
  /// Parent eigenvalues in I whose center lies `buffer` deep inside a cell.
  std::size_t candidates = 0;
  std::size_t unmatched = 0;
  double matched_fraction = 0.0;
  double max_discrepancy = 0.0;
};

/// Pairs parent eigenvalues in I whose centers lie at distance >= buffer from
/// the complement of a cell with eigenvalues of that cell's operator in I
/// centered in the same region. Matching is greedy by energy difference, one to one,
/// and rejects differences above `tolerance`.
inline MatchReport match_across_scales(const Spectrum& parent, const CubeDecomposition& decomposition,
                                       std::span<const Spectrum> cell_spectra, Interval window, double tolerance) {
  if (cell_spectra.size() != decomposition.cells.size()) {
    throw DimensionError("one cell spectrum per decomposition cell is required");
  }
  std::vector<BoxGeometry> inner;
  inner.reserve(decomposition.cells.size());
  for (const auto& c : decomposition.cells) inner.push_back(interior(c, decomposition.buffer));

  // (|dE|, parent index, cell, cell index)
  std::vector<std::tuple<double, std::size_t, std::size_t, std::size_t>> edges;
  MatchReport out;
  std::vector<std::vector<std::size_t>> cell_candidates(cell_spectra.size());
  for (std::size_t c = 0; c < cell_spectra.size(); ++c) {
    const auto [first, last] = index_range(cell_spectra[c], window);
    for (std::size_t n = first; n < last; ++n) {
      const auto col = cell_spectra[c].column_of(n);
      if (!col) throw CapabilityError("cell eigenvector is not available");
      if (inner[c].contains(localization_center(cell_spectra[c].vector(*col), cell_spectra[c].geometry))) {
        cell_candidates[c].push_back(n);
      }
    }
  }
  const auto [pfirst, plast] = index_range(parent, window);
  for (std::size_t n = pfirst; n < plast; ++n) {
    const auto col = parent.column_of(n);
    if (!col) throw CapabilityError("parent eigenvector is not available");
    const Site center = localization_center(parent.vector(*col), parent.geometry);
    const auto c = decomposition.cell_of(center);
    if (!c || !inner[*c].contains(center)) continue;
    ++out.candidates;
    for (std::size_t m : cell_candidates[*c]) {
      const double de = std::abs(parent.eigenvalues[n] - cell_spectra[*c].eigenvalues[m]);
      if (de <= tolerance) edges.emplace_back(de, n, *c, m);
    }
  }
  std::sort(edges.begin(), edges.end());
  std::vector<bool> parent_used(parent.size(), false);
  std::vector<std::vector<bool>> cell_used(cell_spectra.size());
  for (std::size_t c = 0; c < cell_spectra.size(); ++c) cell_used[c].assign(cell_spectra[c].size(), false);
  for (const auto& [de, n, c, m] : edges) {
    if (parent_used[n] || cell_used[c][m]) continue;
    parent_used[n] = true;
    cell_used[c][m] = true;
    out.pairs.push_back({n, c, m, parent.eigenvalues[n], cell_spectra[c].eigenvalues[m]});
    out.max_discrepancy = std::max(out.max_discrepancy, de);
  }
  out.unmatched = out.candidates - out.pairs.size();
  out.matched_fraction =
      out.candidates == 0 ? 0.0 : static_cast<double>(out.pairs.size()) / static_cast<double>(out.candidates);
  return out;
}

}  // namespace anderson
