#pragma once

// Distributional policy evaluation: fits a quantile value network to the
// return distribution of a fixed policy by temporal-difference regression
// onto bellman_target with the quantile-Huber loss.

#include <cstdint>
#include <span>
#include <vector>

#include "dgae/distvalue.hpp"
#include "dgae/errors.hpp"
#include "dgae/mlp.hpp"
#include "dgae/quantile.hpp"

namespace dgae {

struct ValueFitConfig {
  std::size_t quantiles = 32;
  std::size_t hidden = 64;
  std::size_t updates = 20000;
  std::size_t batch_size = 32;
  double gamma = 0.9;
  double learning_rate = 1e-3;
  double kappa = 1.0;
  /// Updates between copies of the online network into the target network.
  std::size_t target_sync = 100;
  double max_grad_norm = 0.0;

  void validate() const {
    if (quantiles == 0 || hidden == 0 || batch_size == 0 || target_sync == 0) {
      throw DomainError("ValueFitConfig: sizes must be positive");
    }
    if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("ValueFitConfig: gamma must lie in (0,1)");
    if (!(learning_rate > 0.0)) throw DomainError("ValueFitConfig: learning_rate must be > 0");
    QuantileHuberParams{kappa}.validate();
  }
};

/// Trains a fresh quantile network on transitions sampled by running
/// `policy` in `env` (continuing episodes, resetting on termination or
/// truncation). Targets come from a periodically synced copy of the network
/// and are zero-bootstrapped on termination only. `on_update(k, net)` runs
/// after every update if provided.
template <typename Env, typename Policy, typename R, typename OnUpdate>
MlpParams train_value_distribution(Env& env, Policy&& policy, const ValueFitConfig& cfg,
                                   R& rng, OnUpdate&& on_update) {
  cfg.validate();
  const auto spec = env.spec();
  MlpParams net = init_mlp(two_layer_widths(spec.state_dim, cfg.hidden, cfg.quantiles), rng, 1.0);
  MlpParams target_net = net;
  Adam opt(net.data.size(), cfg.learning_rate);
  const QuantileFractions fractions(cfg.quantiles);
  const QuantileHuberParams huber{cfg.kappa};
  std::vector<double> obs = env.reset();
  std::vector<double> grad(net.data.size());
  const double w = 1.0 / static_cast<double>(cfg.batch_size);
  MlpCache cache;

  for (std::size_t k = 0; k < cfg.updates; ++k) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const auto action = policy(std::span<const double>(obs), rng);
      auto step = env.step(action);
      const auto next = QuantileDistribution::from_unsorted(forward(target_net, step.next_state));
      const auto target = bellman_target(step.reward, next, cfg.gamma, step.done);

      auto raw = forward(net, obs, cache);
      const auto perm = sort_permutation(raw);
      std::vector<double> sorted(raw.size());
      for (std::size_t i = 0; i < perm.size(); ++i) sorted[i] = raw[perm[i]];
      auto lg = quantile_huber_loss(sorted, target.values(), fractions, huber);
      for (double& g : lg.grad) g *= w;
      backward_accumulate(net, cache, unsort_gradient(lg.grad, perm), grad);

      if (step.done || step.truncated) {
        obs = env.reset();
      } else {
        obs = std::move(step.next_state);
      }
    }
    if (cfg.max_grad_norm > 0.0) clip_grad_norm(grad, cfg.max_grad_norm);
    opt.step(net.data, grad);
    if ((k + 1) % cfg.target_sync == 0) target_net = net;
    on_update(k, static_cast<const MlpParams&>(net));
  }
  return net;
}

template <typename Env, typename Policy, typename R>
MlpParams train_value_distribution(Env& env, Policy&& policy, const ValueFitConfig& cfg,
                                   R& rng) {
  return train_value_distribution(env, policy, cfg, rng, [](std::size_t, const MlpParams&) {});
}

}  // namespace dgae
