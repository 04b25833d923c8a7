#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "anderson/disorder.hpp"
#include "anderson/errors.hpp"
#include "anderson/hamiltonian.hpp"
#include "anderson/rng.hpp"

namespace anderson {

/// Eigenvalues of H_omega(Lambda), ascending and repeated with multiplicity,
/// plus an optional set of orthonormal eigenvectors.
struct Spectrum {
  BoxGeometry geometry;
  std::uint64_t realization_index = 0;
  std::vector<double> eigenvalues;
  /// Column-major |Lambda| x k; column j belongs to eigenvalue vector_index[j].
  std::vector<double> vectors;
  std::vector<std::size_t> vector_index;

  [[nodiscard]] std::size_t size() const noexcept { return eigenvalues.size(); }
  [[nodiscard]] bool has_vectors() const noexcept { return !vector_index.empty(); }
  [[nodiscard]] std::size_t vector_count() const noexcept { return vector_index.size(); }

  [[nodiscard]] std::span<const double> vector(std::size_t column) const {
    const std::size_t n = eigenvalues.size();
    return {vectors.data() + column * n, n};
  }

  /// Column holding the eigenvector of eigenvalue `index`, if stored.
  [[nodiscard]] std::optional<std::size_t> column_of(std::size_t index) const {
    const auto it = std::lower_bound(vector_index.begin(), vector_index.end(), index);
    if (it == vector_index.end() || *it != index) return std::nullopt;
    return static_cast<std::size_t>(it - vector_index.begin());
  }
};

struct EigenOptions {
  std::size_t max_dense_dim = 8192;
};

namespace detail {

// Householder reduction of the row-major symmetric matrix `a` (overwritten
// with the accumulated orthogonal transform) to tridiagonal form: diagonal
// in d, sub-diagonal in e[1..n-1].
inline void householder_tridiagonalize(std::size_t n, std::vector<double>& a, std::vector<double>& d,
                                       std::vector<double>& e, bool accumulate) {
  auto V = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };
  d.assign(n, 0.0);
  e.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) d[j] = V(n - 1, j);

  for (std::size_t i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (std::size_t j = 0; j < i; ++j) {
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
        V(j, i) = 0.0;
      }
    } else {
      for (std::size_t k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;

      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        V(j, i) = f;
        g = e[j] + V(j, j) * f;
        for (std::size_t k = j + 1; k <= i - 1; ++k) {
          g += V(k, j) * d[k];
          e[k] += V(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (std::size_t k = j; k <= i - 1; ++k) V(k, j) -= (f * e[k] + g * d[k]);
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  if (accumulate) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      V(n - 1, i) = V(i, i);
      V(i, i) = 1.0;
      const double h = d[i + 1];
      if (h != 0.0) {
        for (std::size_t k = 0; k <= i; ++k) d[k] = V(k, i + 1) / h;
        for (std::size_t j = 0; j <= i; ++j) {
          double g = 0.0;
          for (std::size_t k = 0; k <= i; ++k) g += V(k, i + 1) * V(k, j);
          for (std::size_t k = 0; k <= i; ++k) V(k, j) -= g * d[k];
        }
      }
      for (std::size_t k = 0; k <= i; ++k) V(k, i + 1) = 0.0;
    }
    for (std::size_t j = 0; j < n; ++j) {
      d[j] = V(n - 1, j);
      V(n - 1, j) = 0.0;
    }
    V(n - 1, n - 1) = 1.0;
  } else {
    // The reduced diagonal is left on the diagonal of the work array.
    for (std::size_t j = 0; j < n; ++j) d[j] = V(j, j);
  }
  e[0] = 0.0;
}

// sqrt(a^2 + b^2) without destructive overflow; cheaper than std::hypot.
inline double pythag(double a, double b) noexcept {
  const double aa = std::abs(a);
  const double ab = std::abs(b);
  if (aa > ab) {
    const double q = ab / aa;
    return aa * std::sqrt(1.0 + q * q);
  }
  if (ab == 0.0) return 0.0;
  const double q = aa / ab;
  return ab * std::sqrt(1.0 + q * q);
}

// Implicit-shift QL on a symmetric tridiagonal matrix. d: diagonal,
// e[0..n-2]: off-diagonal (destroyed). When zt is non-null it holds n rows
// of length n that are rotated along with the iteration (rows are the
// eigenvectors on exit). Eigenvalues are left unsorted in d.
inline void implicit_ql(std::vector<double>& d, std::vector<double>& e, double* zt) {
  const std::size_t n = d.size();
  if (n == 0) return;
  e.resize(n, 0.0);
  e[n - 1] = 0.0;
  constexpr double eps = std::numeric_limits<double>::epsilon();
  constexpr double tiny = std::numeric_limits<double>::min();
  const std::size_t max_iterations = 30 * n;
  std::size_t iterations = 0;

  for (std::size_t l = 0; l < n; ++l) {
    for (;;) {
      std::size_t m = l;
      for (; m + 1 < n; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= eps * dd || std::abs(e[m]) <= tiny) break;
      }
      if (m == l) break;
      if (++iterations > max_iterations) {
        throw ConvergenceError("implicit QL did not converge within " + std::to_string(max_iterations) +
                               " iterations");
      }
      double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
      double r = pythag(g, 1.0);
      g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
      double s = 1.0;
      double c = 1.0;
      double p = 0.0;
      bool early = false;
      std::size_t i = m;
      while (i-- > l) {
        double f = s * e[i];
        const double b = c * e[i];
        r = pythag(f, g);
        e[i + 1] = r;
        if (r == 0.0) {
          d[i + 1] -= p;
          e[m] = 0.0;
          early = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = d[i + 1] - p;
        r = (d[i] - g) * s + 2.0 * c * b;
        p = s * r;
        d[i + 1] = g + p;
        g = c * r - b;
        if (zt != nullptr) {
          double* zi = zt + i * n;
          double* zi1 = zt + (i + 1) * n;
          for (std::size_t k = 0; k < n; ++k) {
            f = zi1[k];
            zi1[k] = s * zi[k] + c * f;
            zi[k] = c * zi[k] - s * f;
          }
        }
      }
      if (early) continue;
      d[l] -= p;
      e[l] = g;
      e[m] = 0.0;
    }
  }
}

// Stable permutation that sorts the eigenvalues ascending.
inline std::vector<std::size_t> ascending_order(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  return order;
}

// Fixes the sign of a vector so that its largest-magnitude entry (first on
// ties) is positive.
inline void canonical_sign(std::span<double> v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (std::abs(v[k]) > std::abs(v[best])) best = k;
  }
  if (!v.empty() && v[best] < 0) {
    for (double& x : v) x = -x;
  }
}

inline void tridiagonal_of(const Hamiltonian& h, std::vector<double>& d, std::vector<double>& e) {
  const std::size_t n = h.size();
  d.assign(h.diagonal().begin(), h.diagonal().end());
  e.assign(n, 0.0);
  if (h.hopping()) {
    for (std::size_t i = 0; i + 1 < n; ++i) e[i] = 1.0;
  }
}

}  // namespace detail

/// All eigenvalues (and optionally eigenvectors) by dense Householder
/// tridiagonalization followed by implicit-shift QL.
inline Spectrum eigen_full(const Hamiltonian& h, bool want_vectors, const EigenOptions& opts = {}) {
  const std::size_t n = h.size();
  if (n > opts.max_dense_dim) {
    throw CapacityError("operator dimension " + std::to_string(n) + " exceeds max_dense_dim " +
                        std::to_string(opts.max_dense_dim));
  }
  Spectrum out{h.geometry(), 0, {}, {}, {}};
  if (n == 0) return out;

  std::vector<double> a = h.to_dense();
  std::vector<double> d;
  std::vector<double> e;
  detail::householder_tridiagonalize(n, a, d, e, want_vectors);
  // Shift the sub-diagonal into QL layout: e[i] couples i and i+1.
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  std::vector<double> zt;
  if (want_vectors) {
    zt.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) zt[i * n + k] = a[k * n + i];
    }
    a.clear();
    a.shrink_to_fit();
  }
  detail::implicit_ql(d, e, want_vectors ? zt.data() : nullptr);

  const auto order = detail::ascending_order(d);
  out.eigenvalues.resize(n);
  for (std::size_t j = 0; j < n; ++j) out.eigenvalues[j] = d[order[j]];
  if (want_vectors) {
    out.vectors.resize(n * n);
    out.vector_index.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      std::copy_n(zt.begin() + static_cast<std::ptrdiff_t>(order[j] * n), n,
                  out.vectors.begin() + static_cast<std::ptrdiff_t>(j * n));
      detail::canonical_sign({out.vectors.data() + j * n, n});
      out.vector_index[j] = j;
    }
  }
  return out;
}

/// Eigenvalue-only O(n^2) path for tridiagonal operators (d = 1 Dirichlet,
/// or hopping disabled).
inline Spectrum eigen_tridiag_fast(const Hamiltonian& h) {
  if (!h.is_tridiagonal()) {
    throw UnsupportedError("tridiagonal fast path needs d = 1 with Dirichlet boundary");
  }
  std::vector<double> d;
  std::vector<double> e;
  detail::tridiagonal_of(h, d, e);
  detail::implicit_ql(d, e, nullptr);
  std::sort(d.begin(), d.end());
  Spectrum out{h.geometry(), 0, {}, {}, {}};
  out.eigenvalues = std::move(d);
  return out;
}

namespace detail {

// LU factorization with partial pivoting of the tridiagonal T - mu I (the
// layout of LAPACK's gttrf). Zero pivots are replaced by `pivmin`.
struct TridiagonalLU {
  std::vector<double> dl, d, du, du2;
  std::vector<unsigned char> swapped;

  void factor(std::span<const double> diag, std::span<const double> off, double mu, double pivmin) {
    const std::size_t n = diag.size();
    d.resize(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = diag[i] - mu;
    dl.assign(off.begin(), off.begin() + static_cast<std::ptrdiff_t>(n > 0 ? n - 1 : 0));
    du = dl;
    du2.assign(n > 1 ? n - 2 : 0, 0.0);
    swapped.assign(n > 0 ? n - 1 : 0, 0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (std::abs(d[i]) >= std::abs(dl[i])) {
        if (d[i] == 0.0) d[i] = pivmin;
        const double fact = dl[i] / d[i];
        dl[i] = fact;
        d[i + 1] -= fact * du[i];
      } else {
        const double fact = d[i] / dl[i];
        d[i] = dl[i];
        dl[i] = fact;
        const double temp = du[i];
        du[i] = d[i + 1];
        d[i + 1] = temp - fact * d[i + 1];
        if (i + 2 < n) {
          du2[i] = du[i + 1];
          du[i + 1] = -fact * du[i + 1];
        }
        swapped[i] = 1;
      }
    }
    if (n > 0 && d[n - 1] == 0.0) d[n - 1] = pivmin;
    for (double& v : d) {
      if (std::abs(v) < pivmin) v = std::copysign(pivmin, v);
    }
  }

  void solve(std::span<double> b) const {
    const std::size_t n = d.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (!swapped[i]) {
        b[i + 1] -= dl[i] * b[i];
      } else {
        const double temp = b[i];
        b[i] = b[i + 1];
        b[i + 1] = temp - dl[i] * b[i];
      }
    }
    b[n - 1] /= d[n - 1];
    if (n > 1) b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    for (std::size_t i = n >= 3 ? n - 2 : 0; i-- > 0;) {
      b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
    }
  }
};

}  // namespace detail

/// Eigenvectors of a tridiagonal operator for the eigenvalues with indices
/// in [first, last), by inverse iteration with re-orthogonalization inside
/// clusters of close eigenvalues. The spectrum must come from `h`.
inline void tridiagonal_eigenvectors(const Hamiltonian& h, Spectrum& spectrum, std::size_t first, std::size_t last) {
  if (!h.is_tridiagonal()) throw UnsupportedError("inverse iteration path needs a tridiagonal operator");
  const std::size_t n = h.size();
  if (spectrum.size() != n) throw DimensionError("spectrum does not match the operator");
  last = std::min(last, n);
  spectrum.vectors.clear();
  spectrum.vector_index.clear();
  if (first >= last) return;

  std::vector<double> diag;
  std::vector<double> off;
  detail::tridiagonal_of(h, diag, off);
  const double norm = h.norm_bound();
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const double cluster_gap = 1e-5 * std::max(norm, 1.0);
  const double pivmin = eps * std::max(norm, 1.0) * 1e-3;

  const std::size_t k = last - first;
  spectrum.vectors.assign(n * k, 0.0);
  spectrum.vector_index.resize(k);
  detail::TridiagonalLU lu;
  std::size_t cluster_start = 0;
  double previous_mu = 0.0;

  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t idx = first + j;
    spectrum.vector_index[j] = idx;
    double mu = spectrum.eigenvalues[idx];
    if (j > 0 && mu - spectrum.eigenvalues[idx - 1] > cluster_gap) cluster_start = j;
    if (j > cluster_start && mu <= previous_mu + 10.0 * eps * std::max(std::abs(mu), 1.0)) {
      mu = previous_mu + 10.0 * eps * std::max(std::abs(mu), 1.0);
    }
    previous_mu = mu;
    lu.factor(diag, off, mu, pivmin);

    std::span<double> v{spectrum.vectors.data() + j * n, n};
    CounterStream start(0x5eed, idx);
    for (double& x : v) x = start.uniform() - 0.5;
    for (int iteration = 0; iteration < 4; ++iteration) {
      double scale = 0.0;
      for (double x : v) scale = std::max(scale, std::abs(x));
      for (double& x : v) x /= scale;
      lu.solve(v);
      for (std::size_t c = cluster_start; c < j; ++c) {
        const double* w = spectrum.vectors.data() + c * n;
        double dot = 0.0;
        for (std::size_t q = 0; q < n; ++q) dot += w[q] * v[q];
        for (std::size_t q = 0; q < n; ++q) v[q] -= dot * w[q];
      }
      double nrm = 0.0;
      for (double x : v) nrm += x * x;
      nrm = std::sqrt(nrm);
      if (!(nrm > 0.0) || !std::isfinite(nrm)) {
        throw ConvergenceError("inverse iteration broke down at eigenvalue " + std::to_string(idx));
      }
      for (double& x : v) x /= nrm;
    }
    detail::canonical_sign(v);
  }
}

/// Picks the cheapest solver: tridiagonal QL (plus inverse iteration when
/// vectors are wanted) when the operator allows it, dense otherwise.
inline Spectrum solve(const Hamiltonian& h, bool want_vectors, const EigenOptions& opts = {}) {
  if (h.is_tridiagonal()) {
    Spectrum s = eigen_tridiag_fast(h);
    if (want_vectors) tridiagonal_eigenvectors(h, s, 0, s.size());
    return s;
  }
  return eigen_full(h, want_vectors, opts);
}

/// Number of eigenvalues of a tridiagonal operator strictly below e, from the
/// inertia of the LDL^T factorization of H - e (Sturm count).
inline std::size_t count_below(const Hamiltonian& h, double e) {
  if (!h.is_tridiagonal()) throw UnsupportedError("Sturm count needs a tridiagonal operator");
  std::vector<double> d;
  std::vector<double> off;
  detail::tridiagonal_of(h, d, off);
  const double pivmin = std::numeric_limits<double>::min() * std::max(1.0, h.norm_bound());
  std::size_t negatives = 0;
  double q = 1.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double b2 = i > 0 ? off[i - 1] * off[i - 1] : 0.0;
    q = d[i] - e - (i > 0 ? b2 / q : 0.0);
    if (std::abs(q) < pivmin) q = -pivmin;
    if (q < 0.0) ++negatives;
  }
  return negatives;
}

/// Eigenvalue count of a tridiagonal operator in [lo, hi).
inline std::size_t count_in_interval(const Hamiltonian& h, Interval window) {
  if (window.lo > window.hi) throw ArgumentError("interval must satisfy lo <= hi");
  return count_below(h, window.hi) - count_below(h, window.lo);
}

/// Number of eigenvalues in the half-open interval [lo, hi).
inline std::size_t count_in_interval(std::span<const double> sorted_eigenvalues, Interval window) {
  if (window.lo > window.hi) throw ArgumentError("interval must satisfy lo <= hi");
  const auto lo = std::lower_bound(sorted_eigenvalues.begin(), sorted_eigenvalues.end(), window.lo);
  const auto hi = std::lower_bound(sorted_eigenvalues.begin(), sorted_eigenvalues.end(), window.hi);
  return static_cast<std::size_t>(hi - lo);
}

inline std::size_t count_in_interval(const Spectrum& spectrum, Interval window) {
  return count_in_interval(spectrum.eigenvalues, window);
}

/// Index range [first, last) of the eigenvalues in [lo, hi).
inline std::pair<std::size_t, std::size_t> index_range(const Spectrum& spectrum, Interval window) {
  const auto& ev = spectrum.eigenvalues;
  const auto lo = std::lower_bound(ev.begin(), ev.end(), window.lo);
  const auto hi = std::lower_bound(ev.begin(), ev.end(), window.hi);
  return {static_cast<std::size_t>(lo - ev.begin()), static_cast<std::size_t>(hi - ev.begin())};
}

}  // namespace anderson
