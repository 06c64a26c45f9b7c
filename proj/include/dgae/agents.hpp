#pragma once

// On-policy actor-critic agents. The distributional variants (DA2C, DPPO)
// train a quantile value network with the quantile-Huber loss and feed the
// policy with distributional GAE; the baselines (A2C, PPO) use a scalar
// critic and scalar GAE. Everything else is shared so the two families
// differ only in the critic.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dgae/advantage.hpp"
#include "dgae/config.hpp"
#include "dgae/distvalue.hpp"
#include "dgae/envs/chain.hpp"
#include "dgae/envs/env.hpp"
#include "dgae/envs/pointmass.hpp"
#include "dgae/errors.hpp"
#include "dgae/mlp.hpp"
#include "dgae/policy.hpp"
#include "dgae/quantile.hpp"

namespace dgae {

using Rng = std::mt19937_64;

/// Independent, reproducible generator for (seed, stream).
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x9e3779b9u};
  return Rng(seq);
}

/// Policy, critic, and their optimizers.
struct ActorCritic {
  GaussianPolicy policy;
  MlpParams value_net;
  bool distributional = true;
  Adam policy_opt{0};
  Adam log_std_opt{0};
  Adam value_opt{0};

  std::size_t quantiles() const { return value_net.output_dim(); }
};

template <typename R>
ActorCritic make_actor_critic(const envs::EnvSpec& spec, const AgentConfig& config,
                              std::size_t value_outputs, std::size_t hidden, R& rng) {
  ActorCritic ac;
  ac.distributional = is_distributional(config.algorithm);
  ac.policy = init_policy(spec.state_dim, spec.action_dim, hidden, rng,
                          config.state_dependent_std, config.initial_log_std);
  ac.value_net = init_mlp(two_layer_widths(spec.state_dim, hidden, value_outputs), rng, 1.0);
  ac.policy_opt = Adam(ac.policy.mlp.data.size(), config.policy_lr);
  ac.log_std_opt = Adam(ac.policy.log_std.size(), config.policy_lr);
  ac.value_opt = Adam(ac.value_net.data.size(), config.value_lr);
  return ac;
}

/// Value-head output sorted into a valid quantile function.
inline QuantileDistribution predict_distribution(const MlpParams& value_net,
                                                 std::span<const double> state) {
  return QuantileDistribution::from_unsorted(forward(value_net, state));
}

/// Quantile-Huber (distributional) or squared-error (scalar) loss of the
/// value head at `state` against `target`; accumulates the parameter
/// gradient scaled by `weight` and returns the loss.
inline double accumulate_value_grad(const MlpParams& value_net, bool distributional,
                                    std::span<const double> state,
                                    const QuantileDistribution& target,
                                    const QuantileFractions& fractions,
                                    const QuantileHuberParams& huber, double weight,
                                    std::span<double> grad) {
  MlpCache cache;
  auto raw = forward(value_net, state, cache);
  if (!distributional) {
    const auto lg = squared_error_loss(raw[0], target[0]);
    const double g = weight * lg.grad[0];
    backward_accumulate(value_net, cache, std::span<const double>(&g, 1), grad);
    return lg.loss;
  }
  const auto perm = sort_permutation(raw);
  std::vector<double> sorted(raw.size());
  for (std::size_t i = 0; i < perm.size(); ++i) sorted[i] = raw[perm[i]];
  auto lg = quantile_huber_loss(sorted, target.values(), fractions, huber);
  for (double& g : lg.grad) g *= weight;
  const auto raw_grad = unsort_gradient(lg.grad, perm);
  backward_accumulate(value_net, cache, raw_grad, grad);
  return lg.loss;
}

/// Drives an environment across rollouts: holds the current observation so
/// episodes continue from one buffer to the next.
template <typename Env>
struct EnvCursor {
  Env env;
  std::vector<double> obs;
  bool needs_reset = true;
};

/// Samples `length` steps with the current policy, storing the critic's
/// prediction for every visited state, the bootstrap prediction for s_T, and
/// the prediction for the true next state of time-limit truncations.
template <typename Env, typename R>
RolloutBuffer collect_rollout(EnvCursor<Env>& cursor, const ActorCritic& agent,
                              std::size_t length, R& rng) {
  RolloutBuffer buffer;
  buffer.transitions.reserve(length);
  buffer.value_dists.reserve(length + 1);
  buffer.log_probs.reserve(length);
  std::vector<double> scalar;
  scalar.reserve(length + 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto predict = [&](std::span<const double> s) {
    return predict_distribution(agent.value_net, s);
  };
  for (std::size_t t = 0; t < length; ++t) {
    if (cursor.needs_reset) {
      cursor.obs = cursor.env.reset();
      cursor.needs_reset = false;
    }
    buffer.value_dists.push_back(predict(cursor.obs));
    scalar.push_back(mean(buffer.value_dists.back()));

    const auto out = evaluate_policy(agent.policy, cursor.obs);
    std::vector<double> action(out.mean.size());
    for (std::size_t i = 0; i < action.size(); ++i) {
      action[i] = out.mean[i] + std::exp(out.log_std[i]) * normal(rng);
    }
    buffer.log_probs.push_back(log_prob_from_output(out, action));

    auto step = cursor.env.step(action);
    Transition tr;
    tr.state = cursor.obs;
    tr.action = std::move(action);
    tr.reward = step.reward;
    tr.next_state = step.next_state;
    tr.done = step.done;
    tr.truncated = step.truncated && !step.done;
    if (tr.truncated) {
      buffer.timeout_dists.emplace(t, predict(step.next_state));
      buffer.timeout_values.emplace(t, mean(buffer.timeout_dists.at(t)));
    }
    buffer.transitions.push_back(std::move(tr));
    if (step.done || step.truncated) {
      cursor.needs_reset = true;
    } else {
      cursor.obs = std::move(step.next_state);
    }
  }
  if (cursor.needs_reset) {
    cursor.obs = cursor.env.reset();
    cursor.needs_reset = false;
  }
  buffer.value_dists.push_back(predict(cursor.obs));
  scalar.push_back(mean(buffer.value_dists.back()));
  buffer.scalar_values = std::move(scalar);
  return buffer;
}

struct UpdateDiagnostics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double mean_advantage = 0.0;
  double policy_grad_norm = 0.0;
  double value_grad_norm = 0.0;
  double clip_fraction = 0.0;
};

/// Advantages the configured algorithm trains on: dgae for the
/// distributional agents, scalar GAE for the baselines.
inline std::vector<double> compute_advantages(const RolloutBuffer& buffer,
                                              const AgentConfig& config) {
  auto adv = is_distributional(config.algorithm) ? dgae(buffer, config.gae)
                                                 : scalar_gae(buffer, config.gae);
  return adv;
}

namespace detail {

inline void require_finite(double x, const char* what, const UpdateDiagnostics& d) {
  if (!std::isfinite(x)) {
    throw NumericError(std::string("non-finite ") + what +
                       " (policy_loss=" + format_double(d.policy_loss) +
                       ", value_loss=" + format_double(d.value_loss) +
                       ", mean_advantage=" + format_double(d.mean_advantage) + ")");
  }
}

/// Rejects buffers whose rewards are not finite before any loss is formed.
inline void require_finite_rewards(const RolloutBuffer& buffer) {
  for (std::size_t t = 0; t < buffer.size(); ++t) {
    if (!std::isfinite(buffer.transitions[t].reward)) {
      throw NumericError("non-finite reward at step " + std::to_string(t) + " (" +
                         format_double(buffer.transitions[t].reward) + ")");
    }
  }
}

/// Fixed regression targets r + gamma G(s') for the selected steps, using the
/// critic's current prediction at the true next state.
inline std::vector<QuantileDistribution> value_targets(const RolloutBuffer& buffer,
                                                       const ActorCritic& agent,
                                                       double gamma) {
  std::vector<QuantileDistribution> targets;
  targets.reserve(buffer.size());
  const std::size_t n = agent.quantiles();
  for (const auto& tr : buffer.transitions) {
    if (tr.done) {
      targets.push_back(QuantileDistribution::constant(n, tr.reward));
    } else {
      targets.push_back(bellman_target(
          tr.reward, predict_distribution(agent.value_net, tr.next_state), gamma, false));
    }
  }
  return targets;
}

inline void apply_policy_step(ActorCritic& agent, PolicyGrad& grad, double max_grad_norm,
                              UpdateDiagnostics& diag) {
  const double norm = grad.norm();
  diag.policy_grad_norm = norm;
  if (max_grad_norm > 0.0 && norm > max_grad_norm) grad.scale(max_grad_norm / (norm + 1e-12));
  agent.policy_opt.step(agent.policy.mlp.data, grad.mlp);
  if (!agent.policy.log_std.empty()) {
    agent.log_std_opt.step(agent.policy.log_std, grad.log_std);
    project_log_std(agent.policy);
  }
}

/// One optimizer step of the critic on the given steps; returns the mean loss.
inline double value_step(ActorCritic& agent, const RolloutBuffer& buffer,
                         std::span<const std::size_t> idx,
                         const std::vector<QuantileDistribution>& targets,
                         const AgentConfig& config, UpdateDiagnostics& diag) {
  std::vector<double> grad(agent.value_net.data.size(), 0.0);
  const QuantileFractions fractions(agent.quantiles());
  const QuantileHuberParams huber{config.kappa};
  const double w = 1.0 / static_cast<double>(idx.size());
  double loss = 0.0;
  for (std::size_t t : idx) {
    loss += accumulate_value_grad(agent.value_net, agent.distributional,
                                  buffer.transitions[t].state, targets[t], fractions,
                                  huber, w, grad);
  }
  loss *= w;
  diag.value_loss = loss;
  require_finite(loss, "value loss", diag);
  diag.value_grad_norm = clip_grad_norm(grad, config.max_grad_norm);
  agent.value_opt.step(agent.value_net.data, grad);
  return loss;
}

}  // namespace detail

/// Synchronous advantage actor-critic step: one policy-gradient step on
/// -mean(A_t log pi(a_t|s_t)) - c_ent * H and one critic step on the whole
/// buffer.
inline UpdateDiagnostics a2c_update(const RolloutBuffer& buffer, ActorCritic& agent,
                                    const AgentConfig& config) {
  buffer.validate();
  detail::require_finite_rewards(buffer);
  UpdateDiagnostics diag;
  auto adv = compute_advantages(buffer, config);
  diag.mean_advantage = std::accumulate(adv.begin(), adv.end(), 0.0) /
                        static_cast<double>(adv.size());
  if (config.normalize()) normalize_advantages(adv);

  const std::size_t T = buffer.size();
  const double w = 1.0 / static_cast<double>(T);
  auto grad = PolicyGrad::zeros_like(agent.policy);
  double objective = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const auto& tr = buffer.transitions[t];
    const auto out = evaluate_policy(agent.policy, tr.state);
    const double logp = accumulate_log_prob_grad(agent.policy, out, tr.action,
                                                 -adv[t] * w, grad);
    objective += adv[t] * logp * w;
    if (config.entropy_coef > 0.0) {
      objective += config.entropy_coef * w *
                   accumulate_entropy_grad(agent.policy, out, -config.entropy_coef * w, grad);
    }
  }
  diag.policy_loss = -objective;
  detail::require_finite(diag.policy_loss, "policy loss", diag);
  detail::apply_policy_step(agent, grad, config.max_grad_norm, diag);

  std::vector<std::size_t> all(T);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto targets = detail::value_targets(buffer, agent, config.gae.gamma);
  detail::value_step(agent, buffer, all, targets, config, diag);
  return diag;
}

/// Per-sample gradient weight of the clipped surrogate min(rA, clip(r)A):
/// zero when the clipped branch is active and binding.
inline double clipped_surrogate_weight(double ratio, double advantage, double clip) {
  if (advantage >= 0.0 && ratio > 1.0 + clip) return 0.0;
  if (advantage < 0.0 && ratio < 1.0 - clip) return 0.0;
  return advantage * ratio;
}

/// Clipped-surrogate PPO: `ppo_epochs` shuffled passes of minibatch steps on
/// both the policy and the critic. Critic targets are refreshed at the start
/// of every epoch with the current critic and held fixed within it.
template <typename R>
UpdateDiagnostics ppo_update(const RolloutBuffer& buffer, ActorCritic& agent,
                             const AgentConfig& config, R& rng) {
  buffer.validate();
  if (buffer.log_probs.size() != buffer.size()) {
    throw StateError("ppo_update: buffer has no behaviour log-probabilities");
  }
  detail::require_finite_rewards(buffer);
  UpdateDiagnostics diag;
  auto adv = compute_advantages(buffer, config);
  const std::size_t T = buffer.size();
  diag.mean_advantage = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(T);
  if (config.normalize()) normalize_advantages(adv);

  std::vector<std::size_t> order(T);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t mb = std::min(config.minibatch_size, T);
  double policy_loss_sum = 0.0, value_loss_sum = 0.0;
  std::size_t batches = 0, clipped = 0, samples = 0;
  for (std::size_t epoch = 0; epoch < config.ppo_epochs; ++epoch) {
    const auto targets = detail::value_targets(buffer, agent, config.gae.gamma);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < T; start += mb) {
      const std::size_t end = std::min(T, start + mb);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const double w = 1.0 / static_cast<double>(idx.size());
      auto grad = PolicyGrad::zeros_like(agent.policy);
      double objective = 0.0;
      for (std::size_t t : idx) {
        const auto& tr = buffer.transitions[t];
        const auto out = evaluate_policy(agent.policy, tr.state);
        const double logp = log_prob_from_output(out, tr.action);
        const double ratio = std::exp(logp - buffer.log_probs[t]);
        const double clipped_ratio =
            std::clamp(ratio, 1.0 - config.ppo_clip, 1.0 + config.ppo_clip);
        objective += std::min(ratio * adv[t], clipped_ratio * adv[t]) * w;
        const double sw = clipped_surrogate_weight(ratio, adv[t], config.ppo_clip);
        if (sw == 0.0 && adv[t] != 0.0) ++clipped;
        ++samples;
        if (sw != 0.0) accumulate_log_prob_grad(agent.policy, out, tr.action, -sw * w, grad);
        if (config.entropy_coef > 0.0) {
          objective += config.entropy_coef * w *
                       accumulate_entropy_grad(agent.policy, out, -config.entropy_coef * w, grad);
        }
      }
      diag.policy_loss = -objective;
      detail::require_finite(diag.policy_loss, "policy loss", diag);
      detail::apply_policy_step(agent, grad, config.max_grad_norm, diag);
      value_loss_sum += detail::value_step(agent, buffer, idx, targets, config, diag);
      policy_loss_sum += -objective;
      ++batches;
    }
  }
  diag.policy_loss = policy_loss_sum / static_cast<double>(batches);
  diag.value_loss = value_loss_sum / static_cast<double>(batches);
  diag.clip_fraction = static_cast<double>(clipped) / static_cast<double>(samples);
  return diag;
}

/// Dispatches to the update rule of the configured algorithm.
template <typename R>
UpdateDiagnostics update(const RolloutBuffer& buffer, ActorCritic& agent,
                         const AgentConfig& config, R& rng) {
  if (is_ppo_family(config.algorithm)) return ppo_update(buffer, agent, config, rng);
  return a2c_update(buffer, agent, config);
}

// ---------------------------------------------------------------------------
// Training loop

using AnyEnv = std::variant<envs::PointMassEnv, envs::ChainMdp>;

inline AnyEnv make_env(const ExperimentConfig& config, std::uint64_t seed) {
  if (config.env == EnvKind::chain) return envs::ChainMdp(config.chain, seed);
  return envs::PointMassEnv(config.pointmass, seed);
}

inline envs::EnvSpec env_spec(const ExperimentConfig& config) {
  return std::visit([](const auto& e) { return e.spec(); }, make_env(config, 0));
}

/// Undiscounted return of one episode under `policy_fn(state)`.
template <typename Env, typename PolicyFn>
double run_episode(Env& env, PolicyFn&& policy_fn) {
  auto obs = env.reset();
  double total = 0.0;
  for (;;) {
    const auto action = policy_fn(std::span<const double>(obs));
    auto step = env.step(action);
    total += step.reward;
    if (step.done || step.truncated) break;
    obs = std::move(step.next_state);
  }
  return total;
}

struct ReturnStats {
  double mean = 0.0;
  double std = 0.0;  // population std over episodes
  std::vector<double> returns;
};

inline ReturnStats summarize_returns(std::vector<double> returns) {
  ReturnStats s;
  const double n = static_cast<double>(returns.size());
  for (double r : returns) s.mean += r;
  s.mean /= n;
  for (double r : returns) s.std += (r - s.mean) * (r - s.mean);
  s.std = std::sqrt(s.std / n);
  s.returns = std::move(returns);
  return s;
}

/// Mean undiscounted return of `episodes` episodes of `policy_fn` on a fresh
/// environment seeded from (seed, eval stream).
template <typename PolicyFn>
ReturnStats evaluate_returns(const ExperimentConfig& config, std::uint64_t seed,
                             std::size_t episodes, PolicyFn&& policy_fn) {
  const std::uint64_t env_seed = make_rng(seed, 4)();
  auto env = make_env(config, env_seed);
  std::vector<double> returns;
  returns.reserve(episodes);
  std::visit(
      [&](auto& e) {
        for (std::size_t i = 0; i < episodes; ++i) returns.push_back(run_episode(e, policy_fn));
      },
      env);
  return summarize_returns(std::move(returns));
}

/// Deterministic (mean-action) evaluation of a policy.
inline ReturnStats evaluate_policy_returns(const ExperimentConfig& config,
                                           const GaussianPolicy& policy,
                                           std::uint64_t seed, std::size_t episodes) {
  return evaluate_returns(config, seed, episodes, [&](std::span<const double> s) {
    return mean_action(policy, s);
  });
}

struct CurvePoint {
  std::size_t timesteps = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
};

struct DiagnosticsRow {
  std::size_t iter = 0;
  std::size_t timesteps = 0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double mean_advantage = 0.0;
  double mean_return_eval = 0.0;  // latest evaluation, NaN before the first
};

struct LearningCurve {
  std::uint64_t seed = 0;
  std::vector<CurvePoint> points;
  std::vector<DiagnosticsRow> diagnostics;
};

struct TrainResult {
  LearningCurve curve;
  ActorCritic agent;
};

/// Hook invoked after every update (diagnostics row just appended).
using TrainObserver = std::function<void(const LearningCurve&, const ActorCritic&)>;

/// Alternates collect_rollout and the configured update until the timestep
/// budget is spent, evaluating the deterministic policy every
/// `eval_interval` timesteps and after the final update.
inline TrainResult train(const ExperimentConfig& config, std::uint64_t seed,
                         const TrainObserver& observer = {}) {
  config.agent.validate();
  Rng init_rng = make_rng(seed, 1);
  Rng action_rng = make_rng(seed, 3);
  const auto spec = env_spec(config);
  TrainResult result{{seed, {}, {}},
                     make_actor_critic(spec, config.agent, config.value_outputs(),
                                       config.hidden, init_rng)};
  auto& agent = result.agent;
  auto& curve = result.curve;
  const std::uint64_t env_seed = make_rng(seed, 2)();
  const std::size_t L = config.agent.rollout_length;
  const std::size_t iterations = config.total_timesteps / L;

  std::visit(
      [&](auto env) {
        EnvCursor<decltype(env)> cursor{std::move(env), {}, true};
        std::size_t timesteps = 0;
        std::size_t next_eval = config.eval_interval;
        double last_eval = std::nan("");
        for (std::size_t it = 0; it < iterations; ++it) {
          // The buffer is local to the iteration: no data crosses policy updates.
          const RolloutBuffer buffer = collect_rollout(cursor, agent, L, action_rng);
          const auto diag = update(buffer, agent, config.agent, action_rng);
          timesteps += L;
          const bool last = it + 1 == iterations;
          bool eval_now = last;
          if (config.eval_interval > 0 && timesteps >= next_eval) {
            eval_now = true;
            while (next_eval <= timesteps) next_eval += config.eval_interval;
          }
          if (eval_now) {
            const auto stats =
                evaluate_policy_returns(config, agent.policy, seed, config.eval_episodes);
            curve.points.push_back({timesteps, stats.mean, stats.std});
            last_eval = stats.mean;
          }
          curve.diagnostics.push_back({it, timesteps, diag.policy_loss, diag.value_loss,
                                       diag.mean_advantage, last_eval});
          if (observer) observer(curve, agent);
        }
      },
      make_env(config, env_seed));
  return result;
}

}  // namespace dgae
