#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "anderson/eigensolve.hpp"
#include "anderson/hamiltonian.hpp"
#include "anderson/ids.hpp"
#include "anderson/localization.hpp"
#include "anderson/pointprocess.hpp"

using namespace anderson;

TEST(LocalizationCenter, DeltaVector) {
  const BoxGeometry g(2, 3, Boundary::Dirichlet);
  std::vector<double> v(g.site_count(), 0.0);
  const Site s{1, -2, 0};
  v[g.rank(s)] = -1.0;
  EXPECT_EQ(localization_center(v, g), s);
  EXPECT_THROW(localization_center(std::vector<double>(g.site_count(), 0.0), g), ArgumentError);
  EXPECT_THROW(localization_center(std::vector<double>(3, 1.0), g), DimensionError);
}

TEST(LocalizationCenter, TieGoesToLexicographicallyLargest) {
  const auto g = BoxGeometry::cube(2, {0, 0, 0}, 2, Boundary::Dirichlet);
  std::vector<double> v(4, 0.0);
  v[g.rank({0, 1, 0})] = 0.5;
  v[g.rank({1, 0, 0})] = -0.5;
  EXPECT_EQ(localization_center(v, g), (Site{1, 0, 0}));
}

TEST(LocalizationCenter, StrongDisorderGroundStateSitsAtPotentialMinimum) {
  // Three sites: a flip needs a near-resonance of order 1 / lambda, rare here.
  // Bigger boxes make close minima common and the argmin oracle breaks down.
  const DisorderModel m(UniformOn{0.0, 1.0}, 50.0, 31);
  const BoxGeometry g(1, 1, Boundary::Dirichlet);
  int hits = 0;
  for (std::uint64_t r = 0; r < 100; ++r) {
    const auto pot = sample_potential(m, g, r);
    const auto h = assemble(m, g, pot);
    const auto s = solve(h, true);
    const auto argmin = static_cast<std::size_t>(std::min_element(pot.begin(), pot.end()) - pot.begin());
    if (localization_center(s.vector(*s.column_of(0)), g) == g.site(argmin)) ++hits;
  }
  EXPECT_GE(hits, 99);
}

TEST(DecayProfile, SyntheticExponential) {
  const BoxGeometry g(1, 100, Boundary::Dirichlet);
  std::vector<double> v(g.site_count());
  for (std::size_t r = 0; r < v.size(); ++r) v[r] = std::exp(-0.5 * std::abs(g.site(r)[0]));
  const auto st = decay_profile(v, localization_center(v, g), g);
  EXPECT_EQ(st.center, (Site{0, 0, 0}));
  EXPECT_NEAR(st.decay_rate, 0.5, 0.02);
  EXPECT_NEAR(st.stretch, 1.0, 0.05);
  EXPECT_EQ(st.flag, LocalizationFlag::Localized);
}

TEST(DecayProfile, DeltaGetsCappedRate) {
  const BoxGeometry g(1, 10, Boundary::Dirichlet);
  std::vector<double> v(g.site_count(), 0.0);
  v[g.rank({3, 0, 0})] = 1.0;
  DecayFitOptions opts;
  const auto st = decay_profile(v, {3, 0, 0}, g, opts);
  EXPECT_EQ(st.decay_rate, opts.rate_cap);
  EXPECT_EQ(st.flag, LocalizationFlag::Localized);
}

TEST(DecayProfile, PlaneWaveIsDelocalized) {
  // Free Dirichlet chain: the extended eigenvector sin(k x).
  const BoxGeometry g(1, 100, Boundary::Dirichlet);
  const std::size_t n = g.site_count();
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = std::sin(std::numbers::pi * 37.0 * static_cast<double>(i + 1) / static_cast<double>(n + 1));
  const auto st = decay_profile(v, localization_center(v, g), g);
  EXPECT_EQ(st.flag, LocalizationFlag::Delocalized);
  // The E = 0 state vanishes on every other site.
  std::vector<double> checker(n);
  for (std::size_t i = 0; i < n; ++i) checker[i] = i % 2 ? 0.0 : 1.0;
  EXPECT_EQ(decay_profile(checker, localization_center(checker, g), g).flag, LocalizationFlag::Delocalized);
  // Same through the solver at lambda = 0.
  const DisorderModel free(UniformOn{0.0, 1.0}, 0.0, 1);
  const auto s = solve(sample_hamiltonian(free, g, 0), true);
  const auto col = *s.column_of(n / 2);
  const auto st2 = decay_profile(s.vector(col), localization_center(s.vector(col), g), g);
  EXPECT_EQ(st2.flag, LocalizationFlag::Delocalized);
}

TEST(DecayProfile, TooFewShells) {
  const BoxGeometry g(1, 1, Boundary::Dirichlet);
  EXPECT_THROW(decay_profile(std::vector<double>{0.1, 1.0, 0.1}, {0, 0, 0}, g), InsufficientProfileError);
}

namespace {

struct Fixture {
  DisorderModel model{UniformOn{0.0, 1.0}, 4.0, 5};
  BoxGeometry box{1, 150, Boundary::Dirichlet};
  Spectrum spectrum = solve(sample_hamiltonian(model, box, 0), true);
  std::shared_ptr<const IdsModel> ids;
  Fixture() {
    std::vector<Spectrum> fit;
    for (std::uint64_t r = 1; r < 9; ++r) fit.push_back(solve(sample_hamiltonian(model, box, r), false));
    ids = std::make_shared<const IdsModel>(fit_ids(fit));
  }
};

}  // namespace

TEST(CenterFilter, FullAndEmptySubbox) {
  const Fixture f;
  const Interval j{1.0, 3.0};
  const auto all = enumerate_centers_in_box(f.spectrum, j, f.box);
  EXPECT_EQ(all.count(), count_in_interval(f.spectrum, j));
  const auto none = enumerate_centers_in_box(f.spectrum, j, BoxGeometry::cube(1, {1000, 0, 0}, 5, Boundary::Dirichlet));
  EXPECT_EQ(none.count(), 0U);
  for (std::size_t i = 1; i < all.eigenvalues.size(); ++i) EXPECT_LE(all.eigenvalues[i - 1], all.eigenvalues[i]);
  const auto no_vectors = solve(sample_hamiltonian(f.model, f.box, 0), false);
  EXPECT_THROW(enumerate_centers_in_box(no_vectors, j, f.box), CapabilityError);
}

TEST(CenterFilter, XiFOnWholeBoxEqualsXiJ) {
  const Fixture f;
  const auto map = unfold(f.ids, {1.0, 3.0});
  const auto all = enumerate_centers_in_box(f.spectrum, map.window(), f.box);
  for (double t : {0.0, 0.3, 0.8}) {
    const auto a = xi_f(all, map, t);
    const auto b = xi_J(f.spectrum, map, t);
    ASSERT_EQ(a.points.size(), b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_NEAR(a.points[i], b.points[i], 1e-9);
  }
  EXPECT_THROW(xi_f(all, map, 1.5), ArgumentError);
}
