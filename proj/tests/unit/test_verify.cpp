#include <gtest/gtest.h>

#include <sstream>

#include "dgae/verify/oracles.hpp"
#include "dgae/verify/verify.hpp"

namespace {

// Deliberately wrong metric: the sign is flipped.
struct FlippedMetric {
  double operator()(const dgae::QuantileDistribution& f, const dgae::QuantileDistribution& g) const {
    return -dgae::directional_metric(f, g);
  }
};

}  // namespace

TEST(Verify, AllChecksPassAtReducedSize) {
  EXPECT_TRUE(dgae::verify::check_theorem1(100).ok);
  EXPECT_TRUE(dgae::verify::check_scalar_reduction(100).ok);
  EXPECT_TRUE(dgae::verify::check_metric_algebra(500).ok);
  EXPECT_TRUE(dgae::verify::check_contraction(100).ok);
  EXPECT_TRUE(dgae::verify::check_quantile_huber_gradient(20).ok);
  EXPECT_TRUE(dgae::verify::check_mlp_gradient(10).ok);
  EXPECT_TRUE(dgae::verify::check_log_prob_gradient(10).ok);
  EXPECT_TRUE(dgae::verify::check_chain_oracle_consistency().ok);
}

TEST(Verify, WrongMetricIsCaught) {
  const auto r = dgae::verify::check_theorem1(50, 1e-10, FlippedMetric{});
  EXPECT_FALSE(r.ok);
  EXPECT_FALSE(r.detail.empty());
}

TEST(Verify, OracleHelpers) {
  const std::vector<double> f{1.0, 2.0}, g{2.0, 4.0};
  EXPECT_DOUBLE_EQ(dgae::oracle::directional(f, g), -1.5);
  EXPECT_DOUBLE_EQ(dgae::oracle::wasserstein(f, g, 1.0), 1.5);
  const auto fd = dgae::oracle::finite_difference(
      [](const std::vector<double>& x) { return x[0] * x[0] + 3.0 * x[1]; }, {2.0, 1.0}, 1e-5);
  EXPECT_NEAR(fd[0], 4.0, 1e-8);
  EXPECT_NEAR(fd[1], 3.0, 1e-8);
  EXPECT_DOUBLE_EQ(dgae::oracle::relative_error(1.0, 1.0), 0.0);
}

TEST(Verify, TableReportsEveryCheck) {
  std::vector<dgae::verify::CheckResult> rs{
      dgae::verify::run_timed("ok", 1.0, [] { return dgae::verify::Outcome{true, "fine"}; }),
      dgae::verify::run_timed("bad", 1.0, [] { return dgae::verify::Outcome{false, "broken"}; })};
  std::ostringstream out;
  dgae::verify::print_table(out, rs);
  EXPECT_NE(out.str().find("ok"), std::string::npos);
  EXPECT_NE(out.str().find("broken"), std::string::npos);
  EXPECT_FALSE(dgae::verify::all_passed(rs));
  rs.pop_back();
  EXPECT_TRUE(dgae::verify::all_passed(rs));
}
