#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dgae/errors.hpp"
#include "dgae/quantile.hpp"

using dgae::QuantileDistribution;
using dgae::QuantileFractions;

TEST(QuantileFractions, MidpointPlacement) {
  QuantileFractions q(4);
  EXPECT_EQ(q[0], 0.125);
  EXPECT_EQ(q[1], 0.375);
  EXPECT_EQ(q[2], 0.625);
  EXPECT_EQ(q[3], 0.875);
  for (std::size_t n = 1; n < 50; ++n) {
    QuantileFractions f(n);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(f[i], static_cast<double>(2 * i + 1) / static_cast<double>(2 * n));
      if (i > 0) EXPECT_LT(f[i - 1], f[i]);
    }
  }
  EXPECT_THROW(QuantileFractions(0), dgae::DimensionError);
}

TEST(QuantileDistribution, RejectsInvalidTables) {
  EXPECT_THROW(QuantileDistribution(std::vector<double>{}), dgae::DimensionError);
  EXPECT_THROW((QuantileDistribution{2.0, 1.0}), dgae::DomainError);
  EXPECT_THROW((QuantileDistribution{0.0, NAN}), dgae::DomainError);
  EXPECT_THROW((QuantileDistribution{0.0, INFINITY}), dgae::DomainError);
  EXPECT_NO_THROW((QuantileDistribution{1.0, 1.0, 2.0}));
}

TEST(QuantileDistribution, FromUnsortedSorts) {
  const auto f = QuantileDistribution::from_unsorted({3.0, -1.0, 2.0});
  EXPECT_EQ(f, (QuantileDistribution{-1.0, 2.0, 3.0}));
}

TEST(DirectionalMetric, SpecExamples) {
  EXPECT_EQ(dgae::directional_metric({3.0}, {5.0}), -2.0);
  EXPECT_EQ(dgae::directional_metric({1, 2, 3, 4}, {2, 3, 4, 5}), -1.0);
  const QuantileDistribution f{-1.0, 0.5, 7.0};
  EXPECT_EQ(dgae::directional_metric(f, f), 0.0);
  EXPECT_THROW(dgae::directional_metric({1.0}, {1.0, 2.0}), dgae::DimensionError);
}

TEST(DirectionalMetric, FunctorMatchesFunction) {
  dgae::DirectionalMetric m;
  EXPECT_EQ(m({1.0, 4.0}, {0.0, 1.0}), dgae::directional_metric({1.0, 4.0}, {0.0, 1.0}));
}

TEST(Mean, SpecExamples) {
  EXPECT_EQ(dgae::mean({2, 4, 6}), 4.0);
  EXPECT_EQ(dgae::mean({5}), 5.0);
  EXPECT_EQ(dgae::mean({0, 0, 0, 12}), 3.0);
}

TEST(Scale, SpecExamples) {
  EXPECT_EQ(dgae::scale({1, 2, 3}, 0.5), (QuantileDistribution{0.5, 1, 1.5}));
  EXPECT_EQ(dgae::scale({-1, 0, 2}, 1.0), (QuantileDistribution{-1, 0, 2}));
  EXPECT_EQ(dgae::scale({10}, 0.9), (QuantileDistribution{9}));
}

TEST(Scale, RejectsNonPositiveEta) {
  EXPECT_THROW(dgae::scale({1.0}, 0.0), dgae::DomainError);
  EXPECT_THROW(dgae::scale({1.0}, -0.5), dgae::DomainError);
}

TEST(Shift, SpecExamples) {
  EXPECT_EQ(dgae::shift({1, 2}, 3.0), (QuantileDistribution{4, 5}));
  EXPECT_EQ(dgae::shift({0}, 0.0), (QuantileDistribution{0}));
  EXPECT_EQ(dgae::shift({-2, 1}, -1.0), (QuantileDistribution{-3, 0}));
}

TEST(Wasserstein, SpecExamples) {
  EXPECT_EQ(dgae::wasserstein_p({1, 2}, {2, 3}, 1.0), 1.0);
  EXPECT_EQ(dgae::wasserstein_p({1, 2}, {1, 2}, 2.0), 0.0);
  EXPECT_EQ(dgae::wasserstein_p({0}, {3}, 2.0), 3.0);
  EXPECT_EQ(dgae::wasserstein_p({0, 1}, {3, 3.5}, INFINITY), 3.0);
  EXPECT_THROW(dgae::wasserstein_p({0}, {3}, 0.5), dgae::DomainError);
  EXPECT_THROW(dgae::wasserstein_p({0}, {3, 4}, 1.0), dgae::DimensionError);
}

TEST(QuantileProperties, RandomizedInvariants) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 3.0);
  std::uniform_int_distribution<std::size_t> pick_n(1, 40);
  std::uniform_real_distribution<double> eta_dist(1e-3, 1.0);
  for (int c = 0; c < 2000; ++c) {
    const std::size_t n = pick_n(rng);
    std::vector<double> a(n), b(n);
    for (auto& x : a) x = normal(rng);
    for (auto& x : b) x = normal(rng);
    const auto f = QuantileDistribution::from_unsorted(a);
    const auto g = QuantileDistribution::from_unsorted(b);
    const double eta = eta_dist(rng);
    const double k = normal(rng);
    // Monotonicity preservation: construction would throw otherwise.
    EXPECT_NO_THROW(dgae::scale(f, eta));
    EXPECT_NO_THROW(dgae::shift(f, k));
    // Linearity collapse.
    EXPECT_NEAR(dgae::directional_metric(f, g), dgae::mean(f) - dgae::mean(g), 1e-13);
    EXPECT_EQ(dgae::directional_metric(f, g), -dgae::directional_metric(g, f));
    EXPECT_LE(std::abs(dgae::directional_metric(f, g)), dgae::wasserstein_p(f, g, 1.0) + 1e-12);
    EXPECT_EQ(dgae::wasserstein_p(f, g, 2.0), dgae::wasserstein_p(g, f, 2.0));
    EXPECT_GE(dgae::wasserstein_p(f, g, 2.0), dgae::wasserstein_p(f, g, 1.0) - 1e-12);
  }
}

TEST(FromSamples, OrderStatisticsAtMidpointRanks) {
  std::vector<double> samples{9, 1, 5, 3, 7, 0, 2, 4, 6, 8};  // 0..9 shuffled
  const auto f = QuantileDistribution::from_samples(samples, 5);
  EXPECT_EQ(f, (QuantileDistribution{1, 3, 5, 7, 9}));
  EXPECT_THROW(QuantileDistribution::from_samples({}, 3), dgae::DimensionError);
}

TEST(FromSamples, MeanConvergesToTrueMean) {
  std::mt19937_64 rng(3);
  std::exponential_distribution<double> expo(1.0);  // mean 1, sd 1
  for (std::size_t m : {1000u, 10000u, 100000u}) {
    std::vector<double> s(m);
    for (auto& x : s) x = expo(rng);
    const auto f = QuantileDistribution::from_samples(s, m / 10);
    EXPECT_NEAR(dgae::mean(f), 1.0, 3.0 / std::sqrt(static_cast<double>(m)) + 10.0 / static_cast<double>(m))
        << "M=" << m;
  }
}

TEST(FromAtoms, InverseCdfAtMidpoints) {
  const auto f = QuantileDistribution::from_atoms({{1.0, 0.5}, {-1.0, 0.5}}, 4);
  EXPECT_EQ(f, (QuantileDistribution{-1, -1, 1, 1}));
  const auto g = QuantileDistribution::from_atoms({{0.0, 0.25}, {2.0, 0.75}}, 2);
  EXPECT_EQ(g, (QuantileDistribution{0, 2}));  // F(0) = 0.25 >= q_0
}

TEST(CsvLine, RoundTripsExactly) {
  const auto sorted = QuantileDistribution::from_unsorted({-0.1, 1.0 / 3.0, 2.5e-17, 1e300});
  const auto line = dgae::to_csv_line(sorted);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  EXPECT_EQ(dgae::parse_csv_line(line), sorted);
}
