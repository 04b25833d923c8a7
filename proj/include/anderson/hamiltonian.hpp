#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "anderson/disorder.hpp"
#include "anderson/errors.hpp"
#include "anderson/geometry.hpp"

namespace anderson {

/// H = -Delta + lambda V on a lattice box, kept as its diagonal plus the
/// implicit nearest-neighbour stencil (every hopping entry equals 1, no
/// diagonal Laplacian term).
class Hamiltonian {
 public:
  Hamiltonian(BoxGeometry geometry, std::vector<double> diagonal, bool hopping = true)
      : geometry_(std::move(geometry)), diagonal_(std::move(diagonal)), hopping_(hopping) {
    if (diagonal_.size() != geometry_.site_count()) {
      throw DimensionError("diagonal has " + std::to_string(diagonal_.size()) + " entries, box has " +
                           std::to_string(geometry_.site_count()) + " sites");
    }
  }

  [[nodiscard]] const BoxGeometry& geometry() const noexcept { return geometry_; }
  [[nodiscard]] std::size_t size() const noexcept { return diagonal_.size(); }
  [[nodiscard]] std::span<const double> diagonal() const noexcept { return diagonal_; }
  [[nodiscard]] bool hopping() const noexcept { return hopping_; }

  /// Copy with the hopping stencil switched off (test hook: the matrix
  /// becomes diagonal and disjoint regions decouple exactly).
  [[nodiscard]] Hamiltonian without_hopping() const { return {geometry_, diagonal_, false}; }

  /// Copy with every diagonal entry shifted by c.
  [[nodiscard]] Hamiltonian shifted(double c) const {
    std::vector<double> d = diagonal_;
    for (double& v : d) v += c;
    return {geometry_, std::move(d), hopping_};
  }

  /// True when the matrix is tridiagonal in rank order.
  [[nodiscard]] bool is_tridiagonal() const noexcept {
    return !hopping_ || (geometry_.dimension() == 1 && !geometry_.wraps());
  }

  /// Calls f(i, j) once per unordered nearest-neighbour pair i < j.
  template <typename F>
  void for_each_edge(F&& f) const {
    if (!hopping_) return;
    const int d = geometry_.dimension();
    const auto side = static_cast<std::size_t>(geometry_.side());
    const std::size_t n = size();
    for (int axis = 0; axis < d; ++axis) {
      const std::size_t st = geometry_.stride(axis);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t coord = (i / st) % side;
        if (coord + 1 < side) {
          f(i, i + st);
        } else if (geometry_.wraps()) {
          f(i - coord * st, i);
        }
      }
    }
  }

  /// y = H x
  void apply(std::span<const double> x, std::span<double> y) const {
    if (x.size() != size() || y.size() != size()) throw DimensionError("vector length does not match operator");
    for (std::size_t i = 0; i < size(); ++i) y[i] = diagonal_[i] * x[i];
    for_each_edge([&](std::size_t i, std::size_t j) {
      y[i] += x[j];
      y[j] += x[i];
    });
  }

  [[nodiscard]] std::size_t edge_count() const {
    std::size_t c = 0;
    for_each_edge([&](std::size_t, std::size_t) { ++c; });
    return c;
  }

  /// Row-major dense copy.
  [[nodiscard]] std::vector<double> to_dense() const {
    const std::size_t n = size();
    std::vector<double> a(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) a[i * n + i] = diagonal_[i];
    for_each_edge([&](std::size_t i, std::size_t j) {
      a[i * n + j] += 1.0;
      a[j * n + i] += 1.0;
    });
    return a;
  }

  [[nodiscard]] double frobenius_norm_squared() const {
    double s = 0.0;
    for (double v : diagonal_) s += v * v;
    return s + 2.0 * static_cast<double>(edge_count());
  }

  /// Upper bound on the operator norm: max absolute row sum.
  [[nodiscard]] double norm_bound() const {
    double m = 0.0;
    for (double v : diagonal_) m = std::max(m, std::abs(v));
    const double hop = hopping_ ? 2.0 * geometry_.dimension() : 0.0;
    return m + hop;
  }

 private:
  BoxGeometry geometry_;
  std::vector<double> diagonal_;
  bool hopping_;
};

/// Builds H_omega(Lambda) from unscaled site values omega: the diagonal is
/// coupling * omega, wrap-around edges exist iff the box is periodic.
inline Hamiltonian assemble(const DisorderModel& model, const BoxGeometry& geom, std::span<const double> potential) {
  if (potential.size() != geom.site_count()) {
    throw DimensionError("potential has " + std::to_string(potential.size()) + " values, box has " +
                         std::to_string(geom.site_count()) + " sites");
  }
  std::vector<double> diag(potential.begin(), potential.end());
  for (double& v : diag) v *= model.coupling();
  return {geom, std::move(diag)};
}

inline Hamiltonian sample_hamiltonian(const DisorderModel& model, const BoxGeometry& geom,
                                      std::uint64_t realization_index) {
  const auto omega = sample_potential(model, geom, realization_index);
  return assemble(model, geom, omega);
}

/// Restriction of H to a sub-cube, with Dirichlet (truncated) boundary.
inline Hamiltonian restrict_to(const Hamiltonian& h, const BoxGeometry& cell) {
  const BoxGeometry& parent = h.geometry();
  std::vector<double> diag(cell.site_count());
  for (std::size_t r = 0; r < diag.size(); ++r) {
    const Site s = cell.site(r);
    if (!parent.contains(s)) throw GeometryError("cell is not contained in the parent box");
    diag[r] = h.diagonal()[parent.rank(s)];
  }
  return {BoxGeometry::cube(cell.dimension(), cell.origin(), cell.side(), Boundary::Dirichlet), std::move(diag),
          h.hopping()};
}

}  // namespace anderson
