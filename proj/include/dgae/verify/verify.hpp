#pragma once

// Property and oracle checks behind `dgae verify` and the acceptance binary.
// Every check is deterministic (fixed seeds) and reports its wall time
// against a budget; a check passes only if it is both correct and on time.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "dgae/advantage.hpp"
#include "dgae/agents.hpp"
#include "dgae/distvalue.hpp"
#include "dgae/envs/chain.hpp"
#include "dgae/format.hpp"
#include "dgae/mlp.hpp"
#include "dgae/policy.hpp"
#include "dgae/policy_evaluation.hpp"
#include "dgae/quantile.hpp"
#include "dgae/verify/oracles.hpp"

namespace dgae::verify {

struct Outcome {
  bool ok = false;
  std::string detail;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  double budget_seconds = 0.0;
};

inline CheckResult run_timed(const std::string& name, double budget_seconds,
                             const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CheckResult r{name, o.ok && sec <= budget_seconds, o.detail, sec, budget_seconds};
  if (o.ok && sec > budget_seconds) r.detail += " (over time budget)";
  return r;
}

/// Random sorted quantile table with `n` entries.
template <typename R>
QuantileDistribution random_distribution(R& rng, std::size_t n, double scale = 5.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  return QuantileDistribution::from_unsorted(std::move(v));
}

/// Random rollout buffer: T in [1, max_t], N in [1, max_n], occasional
/// terminations and time-limit truncations, scalar values set to the means.
template <typename R>
RolloutBuffer random_buffer(R& rng, std::size_t max_t = 64, std::size_t max_n = 16) {
  std::uniform_int_distribution<std::size_t> pick_t(1, max_t), pick_n(1, max_n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t T = pick_t(rng), N = pick_n(rng);
  RolloutBuffer b;
  for (std::size_t t = 0; t < T; ++t) {
    Transition tr;
    tr.reward = normal(rng);
    const double flag = u(rng);
    tr.done = flag < 0.05;
    tr.truncated = flag >= 0.05 && flag < 0.1;
    if (tr.truncated) b.timeout_dists.emplace(t, random_distribution(rng, N));
    b.transitions.push_back(std::move(tr));
  }
  for (std::size_t t = 0; t <= T; ++t) b.value_dists.push_back(random_distribution(rng, N));
  b.set_scalar_values_from_means();
  return b;
}

/// dgae (computed with `metric`) against the forward truncated sum and the
/// lambda-weighted average of n-step estimators.
template <typename Metric = DirectionalMetric>
Outcome check_theorem1(std::size_t cases = 1000, double tol = 1e-10, const Metric& metric = {}) {
  auto rng = make_rng(101, 0);
  std::uniform_real_distribution<double> unit(0.01, 0.99);
  double worst_sum = 0.0, worst_avg = 0.0;
  for (std::size_t c = 0; c < cases; ++c) {
    const auto b = random_buffer(rng);
    const GaeParams p{unit(rng), unit(rng)};
    const auto adv = dgae(b, p, metric);
    const auto direct = oracle::truncated_sum(b, p.gamma, p.lambda);
    const auto avg = oracle::lambda_average(b, p.gamma, p.lambda);
    for (std::size_t t = 0; t < b.size(); ++t) {
      worst_sum = std::max(worst_sum, std::abs(adv[t] - direct[t]));
      worst_avg = std::max(worst_avg, std::abs(adv[t] - avg[t]));
    }
  }
  const bool ok = worst_sum <= tol && worst_avg <= tol;
  return {ok, "max |dgae - truncated sum| = " + format_double(worst_sum) +
                  ", max |dgae - n-step average| = " + format_double(worst_avg) +
                  " (tol " + format_double(tol) + ")"};
}

inline Outcome check_scalar_reduction(std::size_t cases = 1000, double tol = 1e-12) {
  auto rng = make_rng(101, 0);
  std::uniform_real_distribution<double> unit(0.01, 0.99);
  double worst = 0.0;
  for (std::size_t c = 0; c < cases; ++c) {
    const auto b = random_buffer(rng);
    const GaeParams p{unit(rng), unit(rng)};
    const auto a = dgae(b, p);
    const auto s = scalar_gae(b, p);
    for (std::size_t t = 0; t < b.size(); ++t) worst = std::max(worst, std::abs(a[t] - s[t]));
  }
  return {worst <= tol, "max |dgae - scalar_gae| = " + format_double(worst) + " (tol " +
                            format_double(tol) + ")"};
}

/// Scale and shift identities, antisymmetry, and the W1 bound.
inline Outcome check_metric_algebra(std::size_t cases = 10000, double tol = 1e-12) {
  auto rng = make_rng(202, 0);
  std::uniform_int_distribution<std::size_t> pick_n(1, 32);
  std::uniform_real_distribution<double> eta_dist(1e-3, 1.0), shift_dist(-10.0, 10.0);
  std::size_t failures = 0;
  std::string first;
  auto fail = [&](const std::string& what) {
    if (failures++ == 0) first = what;
  };
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t n = pick_n(rng);
    const auto f = random_distribution(rng, n);
    const auto g = random_distribution(rng, n);
    const double eta = eta_dist(rng), k = shift_dist(rng);
    const auto sf = scale(f, eta);
    for (std::size_t i = 0; i < n; ++i) {
      if (sf[i] != eta * f[i]) fail("scale is not elementwise eta * F");
    }
    const double d = directional_metric(f, g);
    if (std::abs(d - oracle::directional(f.values(), g.values())) > tol) fail("metric != definition");
    if (directional_metric(g, f) != -d) fail("antisymmetry");
    if (directional_metric(f, f) != 0.0) fail("d(F,F) != 0");
    if (std::abs(directional_metric(scale(f, eta), scale(g, eta)) - eta * d) > tol * (1 + std::abs(d))) {
      fail("d(eta F, eta G) != eta d(F,G)");
    }
    if (std::abs(directional_metric(shift(f, k), g) - (k + d)) > tol * (1 + std::abs(k) + std::abs(d))) {
      fail("d(F + c, G) != c + d(F,G)");
    }
    const double w1 = wasserstein_p(f, g, 1.0);
    if (std::abs(d) > w1 + tol) fail("|d| > W1");
    if (std::abs(w1 - oracle::wasserstein(f.values(), g.values(), 1.0)) > tol * (1 + w1)) {
      fail("W1 != definition");
    }
  }
  return {failures == 0, failures == 0 ? std::to_string(cases) + " cases"
                                       : std::to_string(failures) + " failures, first: " + first};
}

/// W_p(r + gamma F, r + gamma G) = gamma W_p(F, G) for p in {1, 2, inf}.
inline Outcome check_contraction(std::size_t cases = 1000, double tol = 1e-12) {
  auto rng = make_rng(303, 0);
  std::uniform_int_distribution<std::size_t> pick_n(1, 32);
  std::uniform_real_distribution<double> gamma_dist(0.01, 0.99), r_dist(-5.0, 5.0);
  double worst = 0.0;
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t n = pick_n(rng);
    const auto f = random_distribution(rng, n);
    const auto g = random_distribution(rng, n);
    const double gamma = gamma_dist(rng), r = r_dist(rng);
    const auto tf = bellman_target(r, f, gamma, false);
    const auto tg = bellman_target(r, g, gamma, false);
    for (double p : {1.0, 2.0, std::numeric_limits<double>::infinity()}) {
      const double before = wasserstein_p(f, g, p);
      const double after = wasserstein_p(tf, tg, p);
      worst = std::max(worst, std::abs(after - gamma * before) / std::max(1.0, before));
    }
  }
  return {worst <= tol, "max relative |W(Tf,Tg) - gamma W(f,g)| = " + format_double(worst) +
                            " (tol " + format_double(tol) + ")"};
}

/// Central-difference step for the gradient checks. Smaller steps are
/// dominated by roundoff; this one stays below the kink margin used by the
/// quantile-Huber check.
inline constexpr double kFdStep = 1e-4;

namespace detail {

inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, oracle::relative_error(a[i], b[i]));
  return worst;
}

}  // namespace detail

/// Analytic quantile-Huber gradient against central differences, skipping
/// draws with any |u| within `margin` of 0 or kappa.
inline Outcome check_quantile_huber_gradient(std::size_t cases = 100, double tol = 1e-5) {
  auto rng = make_rng(404, 0);
  std::uniform_int_distribution<std::size_t> pick_n(1, 16);
  std::uniform_real_distribution<double> kappa_dist(0.1, 2.0);
  std::normal_distribution<double> normal(0.0, 2.0);
  const double margin = 1e-3;
  double worst = 0.0;
  std::size_t done = 0;
  while (done < cases) {
    const std::size_t n = pick_n(rng);
    const QuantileHuberParams params{kappa_dist(rng)};
    std::vector<double> pred(n), target(n);
    for (double& x : pred) x = normal(rng);
    for (double& x : target) x = normal(rng);
    std::sort(target.begin(), target.end());
    bool near_kink = false;
    for (double p : pred) {
      for (double t : target) {
        const double a = std::abs(t - p);
        if (a < margin || std::abs(a - params.kappa) < margin) near_kink = true;
      }
    }
    if (near_kink) continue;
    const QuantileFractions fr(n);
    const auto analytic = quantile_huber_loss(pred, target, fr, params).grad;
    const auto numeric = oracle::finite_difference(
        [&](const std::vector<double>& x) { return quantile_huber_loss(x, target, fr, params).loss; },
        pred, kFdStep);
    worst = std::max(worst, detail::max_relative_error(analytic, numeric));
    ++done;
  }
  return {worst < tol, "max relative error " + format_double(worst) + " (tol " + format_double(tol) + ")"};
}

/// MLP parameter and input gradients against central differences.
inline Outcome check_mlp_gradient(std::size_t cases = 100, double tol = 1e-5) {
  auto rng = make_rng(505, 0);
  std::uniform_int_distribution<std::size_t> pick_io(1, 6), pick_h(1, 12);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t in = pick_io(rng), h = pick_h(rng), out = pick_io(rng);
    auto net = init_mlp(two_layer_widths(in, h, out), rng, 1.0);
    for (double& w : net.data) w = 0.5 * normal(rng);
    std::vector<double> x(in), og(out);
    for (double& v : x) v = normal(rng);
    for (double& v : og) v = normal(rng);
    auto objective = [&](const MlpParams& p, const std::vector<double>& input) {
      const auto y = forward(p, input);
      double s = 0.0;
      for (std::size_t k = 0; k < out; ++k) s += og[k] * y[k];
      return s;
    };
    const auto analytic = backward(net, x, og);
    const auto numeric = oracle::finite_difference(
        [&](const std::vector<double>& theta) {
          MlpParams p = net;
          p.data = theta;
          return objective(p, x);
        },
        net.data, kFdStep);
    worst = std::max(worst, detail::max_relative_error(analytic, numeric));

    MlpCache cache;
    forward(net, x, cache);
    std::vector<double> scratch(net.data.size(), 0.0);
    const auto input_grad = backward_accumulate(net, cache, og, scratch);
    const auto numeric_in = oracle::finite_difference(
        [&](const std::vector<double>& v) { return objective(net, v); }, x, kFdStep);
    worst = std::max(worst, detail::max_relative_error(input_grad, numeric_in));
  }
  return {worst < tol, "max relative error " + format_double(worst) + " (tol " + format_double(tol) + ")"};
}

/// Gaussian log-density gradient (network and log-std parameters) against
/// central differences, in both the state-independent and state-dependent
/// std modes. Draws whose log-std would hit the clamp are skipped.
inline Outcome check_log_prob_gradient(std::size_t cases = 100, double tol = 1e-5) {
  auto rng = make_rng(606, 0);
  std::uniform_int_distribution<std::size_t> pick_s(1, 5), pick_a(1, 3), pick_h(2, 10);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> ls_dist(-1.0, 0.5);
  double worst = 0.0;
  std::size_t done = 0;
  while (done < cases) {
    const std::size_t sd = pick_s(rng), ad = pick_a(rng), h = pick_h(rng);
    const bool dep = done % 2 == 1;
    auto pol = init_policy(sd, ad, h, rng, dep);
    for (double& w : pol.mlp.data) w = 0.3 * normal(rng);
    for (double& l : pol.log_std) l = ls_dist(rng);
    std::vector<double> s(sd), a(ad);
    for (double& v : s) v = normal(rng);
    for (double& v : a) v = normal(rng);
    const auto out = evaluate_policy(pol, s);
    bool clamped = false;
    for (double l : out.log_std) clamped = clamped || l < kLogStdMin + 0.1 || l > kLogStdMax - 0.1;
    if (clamped) continue;

    const auto lp = log_prob(pol, s, a);
    const auto num_mlp = oracle::finite_difference(
        [&](const std::vector<double>& theta) {
          GaussianPolicy p = pol;
          p.mlp.data = theta;
          return log_prob(p, s, a).logp;
        },
        pol.mlp.data, kFdStep);
    worst = std::max(worst, detail::max_relative_error(lp.grad.mlp, num_mlp));
    if (!pol.log_std.empty()) {
      const auto num_ls = oracle::finite_difference(
          [&](const std::vector<double>& ls) {
            GaussianPolicy p = pol;
            p.log_std = ls;
            return log_prob(p, s, a).logp;
          },
          pol.log_std, kFdStep);
      worst = std::max(worst, detail::max_relative_error(lp.grad.log_std, num_ls));
    }
    ++done;
  }
  return {worst < tol, "max relative error " + format_double(worst) + " (tol " + format_double(tol) + ")"};
}

/// Mean of the enumerated return distribution against tabular policy
/// evaluation on a family of chains.
inline Outcome check_chain_oracle_consistency(double tol = 1e-6) {
  using envs::RewardLaw;
  double worst = 0.0;
  std::size_t configs = 0;
  for (std::size_t K : {2u, 3u, 5u}) {
    for (double slip : {0.0, 0.1, 0.3}) {
      for (int law = 0; law < 2; ++law) {
        envs::ChainConfig cc;
        cc.states = K;
        cc.slip = slip;
        cc.step_reward = law == 0 ? RewardLaw::constant(-1.0) : RewardLaw::constant(0.5);
        cc.terminal_reward = law == 0 ? RewardLaw::two_atom(-10.0, 10.0, 0.6) : RewardLaw::constant(2.0);
        envs::ChainMdp env(cc);
        envs::ChainPolicy pol{std::vector<double>(K, 0.7)};
        const double gamma = 0.9;
        const auto atoms = envs::exact_return_atoms(env, pol, gamma, 400);
        const auto v = envs::tabular_policy_evaluation(env, pol, gamma);
        for (std::size_t s = 0; s + 1 < K; ++s) worst = std::max(worst, std::abs(atoms[s].mean() - v[s]));
        ++configs;
      }
    }
  }
  return {worst <= tol, std::to_string(configs) + " chains, max |E[G] - V| = " + format_double(worst) +
                            " (tol " + format_double(tol) + ")"};
}

/// Settings of the chain policy-evaluation check.
struct ChainEvalSetup {
  envs::ChainConfig chain;
  envs::ChainPolicy policy;
  ValueFitConfig fit;
  std::size_t oracle_horizon = 400;
  std::uint64_t seed = 1;
};

inline ChainEvalSetup default_chain_eval_setup() {
  ChainEvalSetup s;
  s.chain.states = 5;
  s.chain.slip = 0.1;
  s.chain.step_reward = envs::RewardLaw::constant(-1.0);
  s.chain.terminal_reward = envs::RewardLaw::two_atom(-10.0, 10.0, 0.6);
  s.chain.start_state = -1;
  s.chain.max_episode_steps = 100;
  s.policy.p_right.assign(s.chain.states, 0.7);
  s.fit.quantiles = 32;
  s.fit.hidden = 64;
  s.fit.updates = 20000;
  s.fit.batch_size = 32;
  s.fit.gamma = 0.9;
  s.fit.learning_rate = 1e-3;
  s.fit.kappa = 0.1;
  return s;
}

/// Trains a quantile network by TD on the chain and compares it with the
/// enumerated return distribution at every non-terminal state: W1 must stay
/// below 0.05 * (r_max - r_min).
inline Outcome check_chain_policy_evaluation(const ChainEvalSetup& setup = default_chain_eval_setup()) {
  envs::ChainMdp env(setup.chain, make_rng(setup.seed, 2)());
  const auto exact = envs::exact_return_distribution(env, setup.policy, setup.fit.gamma,
                                                     setup.oracle_horizon, setup.fit.quantiles);
  auto rng = make_rng(setup.seed, 1);
  const auto net = train_value_distribution(env, setup.policy, setup.fit, rng);
  const auto spec = env.spec();
  const double tol = 0.05 * (spec.r_max - spec.r_min);
  double worst = 0.0;
  std::string per_state;
  for (std::size_t s = 0; s + 1 < setup.chain.states; ++s) {
    const double w1 = wasserstein_p(predict_distribution(net, env.observation(s)), exact[s], 1.0);
    worst = std::max(worst, w1);
    per_state += (s ? " " : "") + format_double(std::round(w1 * 1e4) / 1e4);
  }
  return {worst < tol, "W1 per state [" + per_state + "], max " + format_double(worst) +
                           " (tol " + format_double(tol) + ")"};
}

/// The full suite run by `dgae verify`.
inline std::vector<CheckResult> run_suite() {
  std::vector<CheckResult> r;
  r.push_back(run_timed("theorem1_equivalence", 10.0, [] { return check_theorem1(); }));
  r.push_back(run_timed("scalar_gae_reduction", 5.0, [] { return check_scalar_reduction(); }));
  r.push_back(run_timed("metric_algebra", 5.0, [] { return check_metric_algebra(); }));
  r.push_back(run_timed("gamma_contraction", 5.0, [] { return check_contraction(); }));
  r.push_back(run_timed("grad_quantile_huber", 10.0, [] { return check_quantile_huber_gradient(); }));
  r.push_back(run_timed("grad_mlp", 10.0, [] { return check_mlp_gradient(); }));
  r.push_back(run_timed("grad_log_prob", 10.0, [] { return check_log_prob_gradient(); }));
  r.push_back(run_timed("chain_oracle_consistency", 5.0, [] { return check_chain_oracle_consistency(); }));
  r.push_back(run_timed("chain_policy_evaluation", 180.0, [] { return check_chain_policy_evaluation(); }));
  return r;
}

inline void print_table(std::ostream& out, const std::vector<CheckResult>& results) {
  for (const auto& c : results) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name << "  " << format_double(std::round(c.seconds * 1000) / 1000)
        << "s/" << format_double(c.budget_seconds) << "s  " << c.detail << "\n";
  }
}

inline bool all_passed(const std::vector<CheckResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const CheckResult& c) { return c.passed; });
}

}  // namespace dgae::verify
