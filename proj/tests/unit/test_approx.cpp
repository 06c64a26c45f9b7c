#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dgae/agents.hpp"
#include "dgae/mlp.hpp"
#include "dgae/policy.hpp"
#include "dgae/verify/oracles.hpp"
#include "dgae/verify/verify.hpp"

using dgae::GaussianPolicy;
using dgae::MlpParams;

TEST(Mlp, ZeroWeightsGiveZeroOutput) {
  const auto p = MlpParams::zeros({3, 8, 8, 5});
  const auto y = dgae::forward(p, std::vector<double>{1.0, -2.0, 0.5});
  ASSERT_EQ(y.size(), 5u);
  for (double v : y) EXPECT_EQ(v, 0.0);
}

TEST(Mlp, SingleHiddenUnitClosedForm) {
  // [1 -> 1 -> 1]: y = w2 * tanh(w1 x + b1) + b2.
  auto p = MlpParams::zeros({1, 1, 1});
  p.data = {0.7, -0.2, 1.5, 0.3};
  const double x = 0.9;
  EXPECT_DOUBLE_EQ(dgae::forward(p, std::vector<double>{x})[0], 1.5 * std::tanh(0.7 * x - 0.2) + 0.3);
}

TEST(Mlp, InitIsDeterministicAndOrthogonal) {
  auto r1 = dgae::make_rng(3, 1), r2 = dgae::make_rng(3, 1);
  const auto a = dgae::init_mlp({4, 16, 16, 2}, r1, 1.0);
  const auto b = dgae::init_mlp({4, 16, 16, 2}, r2, 1.0);
  EXPECT_EQ(a, b);
  // First layer is 16 x 4: columns are orthogonal with squared norm gain^2 = 2.
  const double* w = a.data.data();
  for (std::size_t c1 = 0; c1 < 4; ++c1) {
    for (std::size_t c2 = 0; c2 < 4; ++c2) {
      double dot = 0.0;
      for (std::size_t r = 0; r < 16; ++r) dot += w[r * 4 + c1] * w[r * 4 + c2];
      EXPECT_NEAR(dot, c1 == c2 ? 2.0 : 0.0, 1e-12);
    }
  }
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(a.data[a.bias_offset(0) + i], 0.0);
}

TEST(Mlp, InputDimensionChecked) {
  const auto p = MlpParams::zeros({3, 4, 1});
  EXPECT_THROW(dgae::forward(p, std::vector<double>{1.0}), dgae::DimensionError);
  EXPECT_THROW(MlpParams::zeros({3}), dgae::DimensionError);
  EXPECT_THROW(MlpParams::zeros({3, 0, 1}), dgae::DimensionError);
}

TEST(Mlp, BackwardIsLinearInOutputGradient) {
  auto rng = dgae::make_rng(4, 1);
  const auto p = dgae::init_mlp({3, 8, 8, 2}, rng, 1.0);
  const std::vector<double> x{0.1, -0.4, 0.8};
  const auto zero = dgae::backward(p, x, std::vector<double>{0.0, 0.0});
  for (double g : zero) EXPECT_EQ(g, 0.0);
  const auto g1 = dgae::backward(p, x, std::vector<double>{0.3, -1.1});
  const auto g2 = dgae::backward(p, x, std::vector<double>{0.6, -2.2});
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g2[i], 2.0 * g1[i], 1e-14);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  auto r = dgae::verify::check_mlp_gradient(100);
  EXPECT_TRUE(r.ok) << r.detail;
}

TEST(Mlp, SortedHeadGradientMatchesFiniteDifferences) {
  auto rng = dgae::make_rng(5, 1);
  const auto net = dgae::init_mlp({2, 8, 8, 6}, rng, 1.0);
  const std::vector<double> s{0.3, -0.7};
  const dgae::QuantileDistribution target{-1.0, -0.5, 0.0, 0.2, 1.0, 2.0};
  const dgae::QuantileFractions fr(6);
  const dgae::QuantileHuberParams hp{1.0};
  std::vector<double> grad(net.data.size(), 0.0);
  dgae::accumulate_value_grad(net, true, s, target, fr, hp, 1.0, grad);
  const auto fd = dgae::oracle::finite_difference(
      [&](const std::vector<double>& theta) {
        MlpParams q = net;
        q.data = theta;
        std::vector<double> scratch(theta.size(), 0.0);
        return dgae::accumulate_value_grad(q, true, s, target, fr, hp, 1.0, scratch);
      },
      net.data, dgae::verify::kFdStep);
  EXPECT_LT(dgae::verify::detail::max_relative_error(grad, fd), 1e-5);
}

TEST(SortPermutation, SortsAndIsIdempotent) {
  const std::vector<double> raw{3.0, -1.0, 2.0, -1.0};
  const auto perm = dgae::sort_permutation(raw);
  EXPECT_EQ(perm, (std::vector<std::size_t>{1, 3, 2, 0}));
  std::vector<double> sorted(raw.size());
  for (std::size_t i = 0; i < perm.size(); ++i) sorted[i] = raw[perm[i]];
  const auto again = dgae::sort_permutation(sorted);
  EXPECT_EQ(again, (std::vector<std::size_t>{0, 1, 2, 3}));
  const auto back = dgae::unsort_gradient(std::vector<double>{10, 20, 30, 40}, perm);
  EXPECT_EQ(back, (std::vector<double>{40, 10, 30, 20}));
}

TEST(PredictDistribution, AlwaysMonotone) {
  auto rng = dgae::make_rng(6, 1);
  const auto net = dgae::init_mlp({3, 16, 16, 32}, rng, 1.0);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (int c = 0; c < 100; ++c) {
    const std::vector<double> s{normal(rng), normal(rng), normal(rng)};
    const auto g = dgae::predict_distribution(net, s);
    for (std::size_t i = 1; i < g.size(); ++i) EXPECT_LE(g[i - 1], g[i]);
  }
}

TEST(GaussianPolicy, LogProbOfStandardNormalAtMean) {
  auto rng = dgae::make_rng(7, 1);
  auto pol = dgae::init_policy(2, 1, 8, rng);
  std::fill(pol.mlp.data.begin(), pol.mlp.data.end(), 0.0);
  const auto r = dgae::log_prob(pol, std::vector<double>{0.5, -0.5}, std::vector<double>{0.0});
  EXPECT_NEAR(r.logp, -0.5 * std::log(2.0 * M_PI), 1e-12);
  EXPECT_NEAR(r.logp, -0.91894, 1e-5);
  // At a = mu the mean gradient vanishes; the log-std gradient is -1.
  for (double g : r.grad.mlp) EXPECT_EQ(g, 0.0);
  EXPECT_DOUBLE_EQ(r.grad.log_std[0], -1.0);
}

TEST(GaussianPolicy, LogProbGradientMatchesFiniteDifferences) {
  auto r = dgae::verify::check_log_prob_gradient(100);
  EXPECT_TRUE(r.ok) << r.detail;
}

TEST(GaussianPolicy, ActionDimensionChecked) {
  auto rng = dgae::make_rng(7, 2);
  const auto pol = dgae::init_policy(2, 1, 8, rng);
  EXPECT_THROW(dgae::log_prob(pol, std::vector<double>{0.0, 0.0}, std::vector<double>{0.0, 1.0}),
               dgae::DimensionError);
}

TEST(GaussianPolicy, SampleActionDeterministicGivenSeed) {
  auto init = dgae::make_rng(8, 1);
  const auto pol = dgae::init_policy(2, 2, 8, init);
  const std::vector<double> s{0.2, 0.1};
  auto a1 = dgae::make_rng(8, 3), a2 = dgae::make_rng(8, 3);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(dgae::sample_action(pol, s, a1), dgae::sample_action(pol, s, a2));
}

TEST(GaussianPolicy, TinyStdCollapsesToMean) {
  auto init = dgae::make_rng(9, 1);
  const auto pol = dgae::init_policy(2, 1, 8, init, false, -5.0);
  const std::vector<double> s{0.4, -0.3};
  const double mu = dgae::mean_action(pol, s)[0];
  auto rng = dgae::make_rng(9, 3);
  for (int i = 0; i < 100; ++i) EXPECT_NEAR(dgae::sample_action(pol, s, rng)[0], mu, 0.05);
}

TEST(GaussianPolicy, SampleMeanAndStdConverge) {
  auto init = dgae::make_rng(10, 1);
  const auto pol = dgae::init_policy(2, 1, 8, init, false, std::log(0.5));
  const std::vector<double> s{1.0, 1.0};
  const double mu = dgae::mean_action(pol, s)[0];
  auto rng = dgae::make_rng(10, 3);
  const int m = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < m; ++i) {
    const double a = dgae::sample_action(pol, s, rng)[0];
    sum += a;
    sq += a * a;
  }
  const double mean = sum / m;
  EXPECT_NEAR(mean, mu, 4.0 * 0.5 / std::sqrt(m));
  EXPECT_NEAR(std::sqrt(sq / m - mean * mean), 0.5, 0.01);
}

TEST(GaussianPolicy, LogStdClampedToRange) {
  auto init = dgae::make_rng(11, 1);
  auto pol = dgae::init_policy(1, 1, 4, init);
  pol.log_std = {10.0};
  EXPECT_EQ(dgae::evaluate_policy(pol, std::vector<double>{0.0}).log_std[0], dgae::kLogStdMax);
  pol.log_std = {-10.0};
  EXPECT_EQ(dgae::evaluate_policy(pol, std::vector<double>{0.0}).log_std[0], dgae::kLogStdMin);
  dgae::project_log_std(pol);
  EXPECT_EQ(pol.log_std[0], dgae::kLogStdMin);
}

TEST(GaussianPolicy, StateDependentStdUsesSecondHead) {
  auto init = dgae::make_rng(12, 1);
  const auto pol = dgae::init_policy(3, 2, 8, init, true, -1.0);
  EXPECT_TRUE(pol.log_std.empty());
  EXPECT_EQ(pol.mlp.output_dim(), 4u);
  EXPECT_EQ(pol.action_dim(), 2u);
  const auto out = dgae::evaluate_policy(pol, std::vector<double>{0.0, 0.0, 0.0});
  EXPECT_NEAR(out.log_std[0], -1.0, 1e-12);
  EXPECT_NEAR(out.log_std[1], -1.0, 1e-12);
  // Log-prob gradient flows into the network only.
  const auto r = dgae::log_prob(pol, std::vector<double>{0.1, 0.2, 0.3}, std::vector<double>{0.5, -0.5});
  EXPECT_TRUE(r.grad.log_std.empty());
  EXPECT_GT(dgae::l2_norm(r.grad.mlp), 0.0);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  dgae::Adam opt(2, 0.1);
  std::vector<double> p{1.0, -1.0};
  opt.step(p, std::vector<double>{3.0, -0.01});
  EXPECT_NEAR(p[0], 0.9, 1e-6);
  EXPECT_NEAR(p[1], -0.9, 1e-5);
  EXPECT_THROW(opt.step(p, std::vector<double>{1.0}), dgae::DimensionError);
}

TEST(Adam, MinimizesQuadratic) {
  dgae::Adam opt(3, 0.05);
  std::vector<double> p{4.0, -3.0, 1.0};
  const std::vector<double> target{1.0, 2.0, -0.5};
  for (int it = 0; it < 3000; ++it) {
    std::vector<double> g(3);
    for (int i = 0; i < 3; ++i) g[i] = p[i] - target[i];
    opt.step(p, g);
  }
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p[i], target[i], 1e-3);
}

TEST(ClipGradNorm, RescalesOnlyAboveThreshold) {
  std::vector<double> g{3.0, 4.0};
  EXPECT_DOUBLE_EQ(dgae::clip_grad_norm(g, 10.0), 5.0);
  EXPECT_EQ(g, (std::vector<double>{3.0, 4.0}));
  dgae::clip_grad_norm(g, 1.0);
  EXPECT_NEAR(dgae::l2_norm(g), 1.0, 1e-10);
  EXPECT_NEAR(g[0] / g[1], 0.75, 1e-12);
  std::vector<double> h{3.0, 4.0};
  dgae::clip_grad_norm(h, 0.0);
  EXPECT_EQ(h, (std::vector<double>{3.0, 4.0}));
}
