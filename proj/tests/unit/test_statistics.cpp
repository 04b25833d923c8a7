#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "anderson/eigensolve.hpp"
#include "anderson/hamiltonian.hpp"
#include "anderson/ids.hpp"
#include "anderson/rng.hpp"
#include "anderson/statistics.hpp"

using namespace anderson;

namespace {

std::shared_ptr<const IdsModel> flat_ids(std::size_t n = 10000, double bw = 1e-3) {
  std::vector<double> x(n + 1);
  for (std::size_t i = 0; i <= n; ++i) x[i] = static_cast<double>(i) / static_cast<double>(n);
  return std::make_shared<const IdsModel>(x, x, n, bw);
}

Spectrum spectrum_of(std::vector<double> ev) {
  const BoxGeometry g(1, static_cast<int>(ev.size() - 1) / 2, Boundary::Dirichlet);
  return Spectrum{g, 0, std::move(ev), {}, {}};
}

double uniform_cdf(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

TEST(KsStatistic, HandComputedCases) {
  const std::vector<double> one{0.5};
  EXPECT_DOUBLE_EQ(ks_statistic(one, uniform_cdf), 0.5);
  const int n = 100;
  std::vector<double> q;
  for (int i = 1; i <= n; ++i) q.push_back((i - 0.5) / n);
  EXPECT_NEAR(ks_statistic(q, uniform_cdf), 0.5 / n, 1e-15);
  const std::vector<double> unsorted{0.3, 0.1};
  EXPECT_THROW(ks_statistic(unsorted, uniform_cdf), ArgumentError);
  EXPECT_THROW(ks_statistic(std::vector<double>{}, uniform_cdf), ArgumentError);
}

TEST(KsStatistic, NominalLevelOnUniformSamples) {
  // 200 samples of 10^4 uniforms; at alpha = 0.05 about 190 should pass.
  const int trials = 200;
  const int n = 10000;
  const double crit = ks_critical(0.05) / std::sqrt(static_cast<double>(n));
  EXPECT_NEAR(ks_critical(0.05), 1.3581, 1e-3);
  int pass = 0;
  std::vector<double> x(n);
  for (int t = 0; t < trials; ++t) {
    CounterStream s(77, streams::kTest + static_cast<std::uint64_t>(t));
    for (double& v : x) v = s.uniform();
    std::sort(x.begin(), x.end());
    if (ks_statistic(x, uniform_cdf) <= crit) ++pass;
  }
  const double rate = static_cast<double>(pass) / trials;
  EXPECT_GE(rate, 0.90);
  EXPECT_LE(rate, 0.995);
}

TEST(KsTwoSample, IdenticalAndDisjoint) {
  const std::vector<double> a{0.1, 0.2, 0.3};
  const std::vector<double> b{1.1, 1.2};
  EXPECT_EQ(ks_two_sample(a, a), 0.0);
  EXPECT_EQ(ks_two_sample(a, b), 1.0);
}

TEST(Spacings, EquispacedLevelsGiveUnitSpacing) {
  const int n = 201;
  std::vector<double> ev;
  for (int i = 0; i < n; ++i) ev.push_back((i + 0.5) / n);
  const auto map = unfold(flat_ids(), {0.0, 1.0});
  for (SpacingScale scale : {SpacingScale::MeanDensity, SpacingScale::Unfolded}) {
    const auto s = unfolded_spacings(spectrum_of(ev), map, scale);
    ASSERT_TRUE(s.has_value());
    ASSERT_EQ(s->spacings.size(), static_cast<std::size_t>(n - 1));
    for (double x : s->spacings) EXPECT_NEAR(x, 1.0, 1e-9);
  }
  // Fewer than two levels in J.
  EXPECT_FALSE(unfolded_spacings(spectrum_of({0.5, 5.0, 6.0}), map).has_value());
}

TEST(Dls, StartsAtOneAndDecreases) {
  const DisorderModel m(UniformOn{0.0, 1.0}, 4.0, 12);
  std::vector<Spectrum> fit;
  std::vector<SpacingSample> samples;
  for (std::uint64_t k = 0; k < 8; ++k) fit.push_back(solve(sample_hamiltonian(m, BoxGeometry(1, 200, Boundary::Dirichlet), k), false));
  auto ids = std::make_shared<const IdsModel>(fit_ids(fit));
  const auto map = unfold(ids, {1.0, 3.0});
  for (const auto& s : fit) samples.push_back(*unfolded_spacings(s, map));
  std::vector<double> grid;
  for (int i = 0; i <= 40; ++i) grid.push_back(0.1 * i);
  const auto d = dls(samples, grid);
  EXPECT_EQ(d.front(), 1.0);
  for (std::size_t i = 1; i < d.size(); ++i) EXPECT_LE(d[i], d[i - 1]);
  EXPECT_THROW(dls(std::vector<SpacingSample>{}, grid), ArgumentError);
}

TEST(GNuJ, ConstantDensityIsExponential) {
  const auto map = unfold(flat_ids(), {0.2, 0.6});
  for (double x : {0.0, 0.5, 1.0, 2.0, 4.0}) EXPECT_NEAR(g_nu_J(map, x), std::exp(-x), 2e-3) << x;
}

TEST(GNuJ, TwoLevelMixture) {
  // nu_J = 0.5 on [0, 0.5), 1.5 on [0.5, 1]: mass 1/4 at rate 0.5, 3/4 at 1.5.
  const auto nu = [](double l) { return l < 0.5 ? 0.5 : 1.5; };
  const std::vector<double> xs{0.0, 1.0, 3.0};
  const auto g = mixed_exponential_survival(nu, {0.0, 1.0}, xs, 4001);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double exact = 0.25 * std::exp(-0.5 * xs[i]) + 0.75 * std::exp(-1.5 * xs[i]);
    EXPECT_NEAR(g[i], exact, 1e-3) << xs[i];
  }
}

TEST(LeastSquares, ExactLine) {
  const std::vector<double> x{0, 1, 2, 3};
  const std::vector<double> y{1, 3, 5, 7};
  const auto f = least_squares(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  EXPECT_THROW(least_squares(std::vector<double>{1, 1}, std::vector<double>{0, 1}), ArgumentError);
}

TEST(Bootstrap, DeterministicAndNonNegative) {
  const std::vector<double> v{1, 4, 2, 8, 5, 7, 3, 6};
  const auto mean = [&](std::span<const std::size_t> pick) {
    double s = 0.0;
    for (auto p : pick) s += v[p];
    return s / static_cast<double>(pick.size());
  };
  const double a = bootstrap_half_width(v.size(), 300, 5, mean);
  EXPECT_EQ(a, bootstrap_half_width(v.size(), 300, 5, mean));
  EXPECT_GT(a, 0.0);
  EXPECT_EQ(bootstrap_half_width(0, 300, 5, mean), 0.0);
}

TEST(SingleSite, ExactMoments) {
  const DisorderModel m(UniformOn{0.0, 1.0}, 1.0, 3);
  const auto mo = single_site_moments(m, {0.2, 0.3});
  EXPECT_NEAR(mo.first, 0.1, 1e-15);
  EXPECT_EQ(mo.second_factorial, 0.0);
  // Monte Carlo over one-site boxes agrees within 4 sigma.
  const BoxGeometry one(1, 0, Boundary::Dirichlet);
  const int n = 20000;
  double k1 = 0.0;
  double k2 = 0.0;
  for (int r = 0; r < n; ++r) {
    const auto s = solve(sample_hamiltonian(m, one, static_cast<std::uint64_t>(r)), false);
    const auto k = static_cast<double>(count_in_interval(s, {0.2, 0.3}));
    k1 += k;
    k2 += k * (k - 1.0);
  }
  EXPECT_NEAR(k1 / n, 0.1, 4.0 * std::sqrt(0.09 / n));
  EXPECT_EQ(k2, 0.0);
}

TEST(WegnerMinami, OneSiteFirstMomentSlopeIsOne) {
  const DisorderModel m(UniformOn{0.0, 1.0}, 1.0, 8);
  const BoxGeometry one(1, 0, Boundary::Dirichlet);
  std::vector<Spectrum> ens;
  for (std::uint64_t r = 0; r < 4000; ++r) ens.push_back(solve(sample_hamiltonian(m, one, r), false));
  const std::vector<double> widths{0.01, 0.02, 0.05, 0.1};
  ScanOptions opts;
  opts.bootstrap_resamples = 50;
  const auto rep = wegner_minami_scan(ens, {0.0, 1.0}, widths, opts);
  EXPECT_NEAR(rep.wegner_slope.value, 1.0, 0.05);
  for (std::size_t i = 0; i < widths.size(); ++i) {
    EXPECT_NEAR(rep.first_moments[i], widths[i], 0.15 * widths[i]);
    EXPECT_EQ(rep.second_factorial_moments[i], 0.0);
    EXPECT_EQ(rep.abscissae[i], widths[i]);
  }
  EXPECT_TRUE(std::isnan(rep.minami_slope.value));
  EXPECT_THROW(wegner_minami_scan(ens, {0.0, 1.0}, std::vector<double>{2.0}, opts), ArgumentError);
}

TEST(CountFluctuations, WholeSpectrumHasNoVariance) {
  const DisorderModel m(UniformOn{0.0, 1.0}, 4.0, 21);
  const BoxGeometry g(1, 100, Boundary::Dirichlet);
  std::vector<Spectrum> ens;
  for (std::uint64_t r = 0; r < 20; ++r) ens.push_back(solve(sample_hamiltonian(m, g, r), false));
  const auto ids = fit_ids(ens);
  const std::vector<Interval> windows{{-10.0, 10.0}, {1.0, 3.0}};
  const std::vector<double> thresholds{0.1, 0.5};
  const auto cf = count_fluctuations(ens, ids, windows, thresholds, 100);
  ASSERT_EQ(cf.size(), 2U);
  EXPECT_EQ(cf[0].variance, 0.0);
  EXPECT_EQ(cf[0].dispersion.value, 0.0);
  EXPECT_NEAR(cf[0].mean_ratio.value, 1.0, 1e-12);
  EXPECT_EQ(cf[0].exceedance, (std::vector<double>{0.0, 0.0}));
  EXPECT_GT(cf[1].variance, 0.0);
  EXPECT_THROW(count_fluctuation({0.0, 1.0}, std::vector<double>{1.0}, 0.0, thresholds), DegenerateWindowError);
}
