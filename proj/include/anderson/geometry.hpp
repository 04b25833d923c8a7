#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "anderson/errors.hpp"

namespace anderson {

enum class Boundary { Periodic, Dirichlet };

inline std::string_view to_string(Boundary b) {
  return b == Boundary::Periodic ? "periodic" : "dirichlet";
}

inline Boundary parse_boundary(std::string_view s) {
  if (s == "periodic") return Boundary::Periodic;
  if (s == "dirichlet") return Boundary::Dirichlet;
  throw ArgumentError("unknown boundary condition '" + std::string(s) + "'");
}

/// Lattice coordinates; entries beyond the box dimension are zero.
using Site = std::array<int, 3>;

/// Axis-aligned lattice box. The canonical box is [-L, L]^d with (2L+1)^d
/// sites; arbitrary origins and side lengths describe sub-cubes of it.
class BoxGeometry {
 public:
  static constexpr int kMaxDimension = 3;

  BoxGeometry(int dimension, int half_side, Boundary boundary)
      : BoxGeometry(dimension, 2 * half_side + 1, boundary, centered_origin(half_side)) {
    if (half_side < 0) throw ArgumentError("half side must be non-negative");
  }

  /// A box of the given side whose lowest corner sits at `origin`.
  static BoxGeometry cube(int dimension, Site origin, int side, Boundary boundary) {
    return BoxGeometry(dimension, side, boundary, origin);
  }

  [[nodiscard]] int dimension() const noexcept { return dimension_; }
  [[nodiscard]] int side() const noexcept { return side_; }
  /// L such that side = 2L+1; only meaningful for odd sides.
  [[nodiscard]] int half_side() const noexcept { return (side_ - 1) / 2; }
  [[nodiscard]] Boundary boundary() const noexcept { return boundary_; }
  [[nodiscard]] const Site& origin() const noexcept { return origin_; }
  [[nodiscard]] std::size_t site_count() const noexcept { return site_count_; }

  [[nodiscard]] Site site(std::size_t rank) const {
    Site s{0, 0, 0};
    for (int i = dimension_ - 1; i >= 0; --i) {
      s[i] = origin_[i] + static_cast<int>(rank % static_cast<std::size_t>(side_));
      rank /= static_cast<std::size_t>(side_);
    }
    return s;
  }

  /// Lexicographic rank: the first coordinate is the most significant.
  [[nodiscard]] std::size_t rank(const Site& s) const {
    std::size_t r = 0;
    for (int i = 0; i < dimension_; ++i) {
      r = r * static_cast<std::size_t>(side_) + static_cast<std::size_t>(s[i] - origin_[i]);
    }
    return r;
  }

  [[nodiscard]] bool contains(const Site& s) const noexcept {
    for (int i = 0; i < dimension_; ++i) {
      if (s[i] < origin_[i] || s[i] >= origin_[i] + side_) return false;
    }
    return true;
  }

  /// Stride of axis `axis` in rank space.
  [[nodiscard]] std::size_t stride(int axis) const noexcept {
    std::size_t st = 1;
    for (int i = dimension_ - 1; i > axis; --i) st *= static_cast<std::size_t>(side_);
    return st;
  }

  /// Whether the nearest-neighbour graph wraps around (needs side >= 3 so
  /// that no site is its own neighbour and no edge is doubled).
  [[nodiscard]] bool wraps() const noexcept { return boundary_ == Boundary::Periodic && side_ >= 3; }

  /// Sup-norm distance, minimum-image when the box wraps.
  [[nodiscard]] int sup_distance(const Site& a, const Site& b) const noexcept {
    int m = 0;
    for (int i = 0; i < dimension_; ++i) {
      int d = a[i] > b[i] ? a[i] - b[i] : b[i] - a[i];
      if (wraps() && side_ - d < d) d = side_ - d;
      if (d > m) m = d;
    }
    return m;
  }

  friend bool operator==(const BoxGeometry&, const BoxGeometry&) = default;

 private:
  BoxGeometry(int dimension, int side, Boundary boundary, Site origin)
      : dimension_(dimension), side_(side), boundary_(boundary), origin_(origin) {
    if (dimension < 1 || dimension > kMaxDimension) {
      throw ArgumentError("lattice dimension must be 1, 2 or 3 (got " + std::to_string(dimension) + ")");
    }
    if (side < 1) throw ArgumentError("box side must be positive");
    for (int i = dimension; i < kMaxDimension; ++i) origin_[i] = 0;
    site_count_ = 1;
    for (int i = 0; i < dimension; ++i) site_count_ *= static_cast<std::size_t>(side);
  }

  static Site centered_origin(int half_side) { return {-half_side, -half_side, -half_side}; }

  int dimension_;
  int side_;
  Boundary boundary_;
  Site origin_;
  std::size_t site_count_ = 0;
};

inline std::string format_site(const Site& s, int dimension) {
  std::string out = "(";
  for (int i = 0; i < dimension; ++i) {
    if (i) out += ' ';
    out += std::to_string(s[i]);
  }
  return out + ")";
}

}  // namespace anderson
