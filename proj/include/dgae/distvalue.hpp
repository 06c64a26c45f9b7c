#pragma once

// Distributional Bellman targets and the quantile-Huber regression loss.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "dgae/errors.hpp"
#include "dgae/quantile.hpp"

namespace dgae {

struct QuantileHuberParams {
  double kappa = 1.0;

  void validate() const {
    if (!(kappa > 0.0)) throw DomainError("QuantileHuberParams: kappa must be > 0");
  }
};

/// r + gamma * G(s') for non-terminal steps, the constant [r]*N otherwise.
/// The result is a fixed regression target.
inline QuantileDistribution bellman_target(double reward,
                                           const QuantileDistribution& g_next,
                                           double gamma, bool done) {
  if (done) return QuantileDistribution::constant(g_next.size(), reward);
  return shift(scale(g_next, gamma), reward);
}

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Huber function: u^2/2 on |u| <= kappa, kappa(|u| - kappa/2) outside.
inline double huber(double u, double kappa) {
  const double a = std::abs(u);
  return a <= kappa ? 0.5 * u * u : kappa * (a - 0.5 * kappa);
}

/// (1/N^2) sum_i sum_j |q_i - 1{u_ij < 0}| * huber(u_ij), u_ij = target[j] -
/// predicted[i], with the analytic gradient w.r.t. predicted. The inner
/// loop order is fixed so results are bitwise reproducible.
inline LossAndGrad quantile_huber_loss(std::span<const double> predicted,
                                       std::span<const double> target,
                                       const QuantileFractions& fractions,
                                       const QuantileHuberParams& params) {
  const std::size_t n = predicted.size();
  if (target.size() != n || fractions.size() != n) {
    throw DimensionError("quantile_huber_loss: sizes differ (predicted " +
                         std::to_string(n) + ", target " +
                         std::to_string(target.size()) + ", fractions " +
                         std::to_string(fractions.size()) + ")");
  }
  const double kappa = params.kappa;
  const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  LossAndGrad out;
  out.grad.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double q = fractions[i];
    double loss_i = 0.0;
    double grad_i = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double u = target[j] - predicted[i];
      const double w = u < 0.0 ? 1.0 - q : q;
      // c = clamp(u): c * (u - c/2) is 0.5 u^2 inside the band and
      // kappa * (|u| - kappa/2) outside it.
      const double c = std::clamp(u, -kappa, kappa);
      loss_i += w * c * (u - 0.5 * c);
      grad_i -= w * c;
    }
    out.loss += loss_i;
    out.grad[i] = grad_i * norm;
  }
  out.loss *= norm;
  return out;
}

inline LossAndGrad quantile_huber_loss(const QuantileDistribution& predicted,
                                       const QuantileDistribution& target,
                                       const QuantileFractions& fractions,
                                       const QuantileHuberParams& params) {
  return quantile_huber_loss(predicted.values(), target.values(), fractions,
                             params);
}

/// 0.5 * (target - predicted)^2 for the scalar baseline critics.
inline LossAndGrad squared_error_loss(double predicted, double target) {
  const double u = target - predicted;
  return {0.5 * u * u, {-u}};
}

/// Monte Carlo estimate of G(state): `samples` independent discounted-return
/// rollouts of length <= horizon, reduced to midpoint order statistics.
///
/// Env needs reset_to(span) and step(span) returning a StepResult; Policy is
/// callable as policy(state, rng) -> action.
template <typename Env, typename Policy, typename Rng>
QuantileDistribution evaluate_policy_distribution(
    Env& env, Policy&& policy, std::span<const double> state, double gamma,
    std::size_t horizon, std::size_t samples, std::size_t n_quantiles, Rng& rng) {
  if (samples == 0) throw DomainError("evaluate_policy_distribution: samples must be > 0");
  std::vector<double> returns;
  returns.reserve(samples);
  for (std::size_t m = 0; m < samples; ++m) {
    std::vector<double> obs = env.reset_to(state);
    double ret = 0.0;
    double discount = 1.0;
    for (std::size_t k = 0; k < horizon; ++k) {
      const auto action = policy(std::span<const double>(obs), rng);
      const auto step = env.step(action);
      ret += discount * step.reward;
      discount *= gamma;
      if (step.done) break;
      obs = step.next_state;
    }
    returns.push_back(ret);
  }
  return QuantileDistribution::from_samples(std::move(returns), n_quantiles);
}

}  // namespace dgae
