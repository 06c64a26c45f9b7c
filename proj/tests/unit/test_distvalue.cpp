#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dgae/agents.hpp"
#include "dgae/distvalue.hpp"
#include "dgae/envs/chain.hpp"
#include "dgae/envs/pointmass.hpp"
#include "dgae/verify/verify.hpp"

using dgae::QuantileDistribution;
using dgae::QuantileFractions;
using dgae::QuantileHuberParams;

TEST(BellmanTarget, SpecExamples) {
  EXPECT_EQ(dgae::bellman_target(1.0, {2.0, 4.0}, 0.5, false), (QuantileDistribution{2.0, 3.0}));
  EXPECT_EQ(dgae::bellman_target(3.0, {-5.0, 8.0}, 0.5, true), (QuantileDistribution{3.0, 3.0}));
  const auto t = dgae::bellman_target(2.0, {-5.0, 8.0}, 1e-300, false);
  EXPECT_NEAR(t[0], 2.0, 1e-12);
  EXPECT_NEAR(t[1], 2.0, 1e-12);
}

TEST(BellmanTarget, PreservesMonotonicityAndContracts) {
  auto r = dgae::verify::check_contraction(300);
  EXPECT_TRUE(r.ok) << r.detail;
}

TEST(QuantileHuber, ZeroAtMatchingPointMass) {
  const auto f = QuantileDistribution::constant(4, 1.5);
  const auto lg = dgae::quantile_huber_loss(f, f, QuantileFractions(4), {});
  EXPECT_EQ(lg.loss, 0.0);
  for (double g : lg.grad) EXPECT_EQ(g, 0.0);
}

TEST(QuantileHuber, SpreadTablesPayCrossTermsAgainstThemselves) {
  // Every predicted quantile is regressed on every target sample, so equal
  // tables with spread still have u_ij != 0 for i != j.
  const QuantileDistribution f{-1.0, 0.5, 2.0, 2.0};
  const auto lg = dgae::quantile_huber_loss(f, f, QuantileFractions(4), {});
  EXPECT_GT(lg.loss, 0.0);
  double total = 0.0;
  for (double g : lg.grad) total += g;
  EXPECT_NE(total, 0.0);
}

TEST(QuantileHuber, SpecHandValue) {
  const auto lg = dgae::quantile_huber_loss({0.0}, {0.5}, QuantileFractions(1), {1.0});
  EXPECT_DOUBLE_EQ(lg.loss, 0.0625);
  EXPECT_DOUBLE_EQ(lg.grad[0], -0.25);
}

TEST(QuantileHuber, LinearBranchBeyondKappa) {
  // u = 3 > kappa = 1, q = 0.5: 0.5 * 1 * (3 - 0.5) = 1.25.
  const auto lg = dgae::quantile_huber_loss({0.0}, {3.0}, QuantileFractions(1), {1.0});
  EXPECT_DOUBLE_EQ(lg.loss, 1.25);
  EXPECT_DOUBLE_EQ(lg.grad[0], -0.5);
  // At the kink the quadratic branch applies: 0.5 * 0.5 * 1 = 0.25.
  EXPECT_DOUBLE_EQ(dgae::quantile_huber_loss({0.0}, {1.0}, QuantileFractions(1), {1.0}).loss, 0.25);
  EXPECT_DOUBLE_EQ(dgae::huber(1.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(dgae::huber(-3.0, 1.0), 2.5);
}

TEST(QuantileHuber, AsymmetricWeights) {
  // N = 2: q = 0.25, 0.75. Predicting above the target is penalized with
  // weight 1 - q, below it with weight q.
  const QuantileFractions fr(2);
  const auto over = dgae::quantile_huber_loss({1.0, 1.0}, {0.0, 0.0}, fr, {10.0});
  const auto under = dgae::quantile_huber_loss({-1.0, -1.0}, {0.0, 0.0}, fr, {10.0});
  EXPECT_DOUBLE_EQ(over.loss, under.loss);
  EXPECT_DOUBLE_EQ(over.grad[0], 2.0 * 0.75 * 1.0 / 4.0);
  EXPECT_DOUBLE_EQ(under.grad[0], -2.0 * 0.25 * 1.0 / 4.0);
}

TEST(QuantileHuber, PositiveAwayFromTarget) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (int c = 0; c < 500; ++c) {
    std::vector<double> p(6), t(6);
    for (auto& x : p) x = normal(rng);
    for (auto& x : t) x = normal(rng);
    std::sort(t.begin(), t.end());
    EXPECT_GT(dgae::quantile_huber_loss(p, t, QuantileFractions(6), {1.0}).loss, 0.0);
  }
}

TEST(QuantileHuber, DimensionMismatch) {
  EXPECT_THROW(dgae::quantile_huber_loss({0.0, 1.0}, {0.0}, QuantileFractions(2), {}),
               dgae::DimensionError);
}

TEST(QuantileHuber, GradientMatchesFiniteDifferences) {
  auto r = dgae::verify::check_quantile_huber_gradient(100);
  EXPECT_TRUE(r.ok) << r.detail;
}

TEST(QuantileHuber, BitwiseDeterministic) {
  std::vector<double> p{0.3, -1.2, 2.5}, t{-1.0, 0.0, 4.0};
  const auto a = dgae::quantile_huber_loss(p, t, QuantileFractions(3), {0.7});
  const auto b = dgae::quantile_huber_loss(p, t, QuantileFractions(3), {0.7});
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.grad, b.grad);
}

TEST(QuantileHuber, RegressionFixedPointOnTwoAtomTarget) {
  // Gradient descent against 4 samples of a 2-atom law {0 w.p. 1/4, 10 w.p.
  // 3/4} converges to its midpoint quantiles [0, 10, 10, 10] when kappa is
  // small relative to the atom gap.
  const QuantileFractions fr(4);
  const std::vector<double> target{0.0, 10.0, 10.0, 10.0};
  std::vector<double> pred{4.0, 5.0, 6.0, 7.0};
  for (int it = 0; it < 20000; ++it) {
    const auto lg = dgae::quantile_huber_loss(pred, target, fr, {0.01});
    for (std::size_t i = 0; i < 4; ++i) pred[i] -= 2.0 * lg.grad[i];
  }
  EXPECT_NEAR(pred[0], 0.0, 0.02);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_NEAR(pred[i], 10.0, 0.02);
}

TEST(QuantileHuberParams, KappaPositive) {
  EXPECT_THROW(QuantileHuberParams{0.0}.validate(), dgae::DomainError);
  EXPECT_NO_THROW(QuantileHuberParams{}.validate());
  EXPECT_EQ(QuantileHuberParams{}.kappa, 1.0);
}

TEST(EvaluatePolicyDistribution, DeterministicChainIsPointMass) {
  dgae::envs::ChainConfig cc;
  cc.states = 4;
  cc.step_reward = dgae::envs::RewardLaw::constant(-1.0);
  cc.terminal_reward = dgae::envs::RewardLaw::constant(5.0);
  dgae::envs::ChainMdp env(cc, 1);
  dgae::envs::ChainPolicy right{{1.0, 1.0, 1.0, 1.0}};
  auto rng = dgae::make_rng(1, 3);
  const auto g = dgae::evaluate_policy_distribution(env, right, env.observation(0), 0.9, 50, 20, 8, rng);
  const double exact = -1.0 - 0.9 + 0.81 * 5.0;
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], exact, 1e-12);
}

TEST(EvaluatePolicyDistribution, CoinFlipTerminalIsTwoAtoms) {
  dgae::envs::ChainConfig cc;
  cc.states = 2;
  cc.terminal_reward = dgae::envs::RewardLaw::two_atom(-1.0, 1.0, 0.5);
  dgae::envs::ChainMdp env(cc, 2);
  dgae::envs::ChainPolicy right{{1.0, 1.0}};
  auto rng = dgae::make_rng(2, 3);
  const auto g = dgae::evaluate_policy_distribution(env, right, env.observation(0), 0.99, 10, 4000, 10, rng);
  EXPECT_EQ(g[0], -1.0);
  EXPECT_EQ(g[3], -1.0);
  EXPECT_EQ(g[6], 1.0);
  EXPECT_EQ(g[9], 1.0);
  const auto exact = dgae::envs::exact_return_distribution(env, right, 0.99, 10, 10)[0];
  EXPECT_LE(dgae::wasserstein_p(g, exact, 1.0), 0.2 + 1e-12);
}

TEST(EvaluatePolicyDistribution, MonteCarloErrorShrinksWithSamples) {
  dgae::envs::ChainConfig cc;
  cc.states = 4;
  cc.slip = 0.2;
  cc.step_reward = dgae::envs::RewardLaw::constant(-1.0);
  cc.terminal_reward = dgae::envs::RewardLaw::two_atom(0.0, 4.0, 0.5);
  dgae::envs::ChainMdp env(cc, 3);
  dgae::envs::ChainPolicy pol{{0.8, 0.8, 0.8, 0.8}};
  const std::size_t n = 16;
  const auto exact = dgae::envs::exact_return_distribution(env, pol, 0.9, 300, n)[0];
  auto gap = [&](std::size_t samples) {
    double total = 0.0;
    for (std::uint64_t rep = 0; rep < 8; ++rep) {
      auto rng = dgae::make_rng(100 + rep, samples);
      const auto g = dgae::evaluate_policy_distribution(env, pol, env.observation(0), 0.9, 300, samples, n, rng);
      total += dgae::wasserstein_p(g, exact, 1.0);
    }
    return total / 8.0;
  };
  const double small = gap(200), large = gap(2000);
  EXPECT_LT(large, small);
  EXPECT_LT(large / small, 0.6);  // ~1/sqrt(10) = 0.32 with sampling slack
}
