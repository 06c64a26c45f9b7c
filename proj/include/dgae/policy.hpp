#pragma once

// Diagonal Gaussian policy on top of an MLP mean head.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "dgae/errors.hpp"
#include "dgae/mlp.hpp"

namespace dgae {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

/// pi(a|s) = N(mu(s), diag(exp(log_std)^2)).
///
/// With a state-independent std, `log_std` holds one parameter per action
/// dimension and the network outputs the mean only. With
/// `state_dependent_std`, the network outputs [mean, log_std] (2A values) and
/// `log_std` is empty. Log-stds are clamped to [-5, 2].
struct GaussianPolicy {
  MlpParams mlp;
  std::vector<double> log_std;
  bool state_dependent_std = false;

  std::size_t action_dim() const {
    return state_dependent_std ? mlp.output_dim() / 2 : mlp.output_dim();
  }
  std::size_t state_dim() const { return mlp.input_dim(); }

  friend bool operator==(const GaussianPolicy&, const GaussianPolicy&) = default;
};

/// Gradient with respect to every policy parameter, split like the policy.
struct PolicyGrad {
  std::vector<double> mlp;
  std::vector<double> log_std;

  static PolicyGrad zeros_like(const GaussianPolicy& p) {
    return {std::vector<double>(p.mlp.data.size(), 0.0),
            std::vector<double>(p.log_std.size(), 0.0)};
  }
  void scale(double s) {
    for (double& g : mlp) g *= s;
    for (double& g : log_std) g *= s;
  }
  double norm() const {
    double s = 0.0;
    for (double g : mlp) s += g * g;
    for (double g : log_std) s += g * g;
    return std::sqrt(s);
  }
};

template <typename Rng>
GaussianPolicy init_policy(std::size_t state_dim, std::size_t action_dim,
                           std::size_t hidden, Rng& rng,
                           bool state_dependent_std = false,
                           double initial_log_std = 0.0) {
  GaussianPolicy p;
  p.state_dependent_std = state_dependent_std;
  const std::size_t out = state_dependent_std ? 2 * action_dim : action_dim;
  p.mlp = init_mlp(two_layer_widths(state_dim, hidden, out),
                   rng, 0.01);
  if (state_dependent_std) {
    double* bias = p.mlp.data.data() + p.mlp.bias_offset(p.mlp.num_layers() - 1);
    for (std::size_t i = 0; i < action_dim; ++i) bias[action_dim + i] = initial_log_std;
  } else {
    p.log_std.assign(action_dim, initial_log_std);
  }
  return p;
}

/// Mean and (clamped) log-std at `state`, with the forward cache kept for
/// gradient evaluation.
struct PolicyOutput {
  std::vector<double> mean;
  std::vector<double> log_std;
  std::vector<bool> log_std_clamped;
  MlpCache cache;
};

inline PolicyOutput evaluate_policy(const GaussianPolicy& policy,
                                    std::span<const double> state) {
  PolicyOutput out;
  auto raw = forward(policy.mlp, state, out.cache);
  const std::size_t A = policy.action_dim();
  out.mean.assign(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(A));
  out.log_std.resize(A);
  out.log_std_clamped.resize(A);
  for (std::size_t i = 0; i < A; ++i) {
    const double raw_ls = policy.state_dependent_std ? raw[A + i] : policy.log_std[i];
    out.log_std[i] = std::clamp(raw_ls, kLogStdMin, kLogStdMax);
    out.log_std_clamped[i] = raw_ls < kLogStdMin || raw_ls > kLogStdMax;
  }
  return out;
}

/// Adds `weight` * d(log pi)/d(mean, log_std) into `grad` by backpropagating
/// the per-output gradients through the network.
inline void accumulate_output_grad(const GaussianPolicy& policy,
                                   const PolicyOutput& out,
                                   std::span<const double> d_mean,
                                   std::span<const double> d_log_std,
                                   PolicyGrad& grad) {
  const std::size_t A = policy.action_dim();
  std::vector<double> out_grad(policy.mlp.output_dim(), 0.0);
  for (std::size_t i = 0; i < A; ++i) out_grad[i] = d_mean[i];
  for (std::size_t i = 0; i < A; ++i) {
    const double g = out.log_std_clamped[i] ? 0.0 : d_log_std[i];
    if (policy.state_dependent_std) {
      out_grad[A + i] = g;
    } else {
      grad.log_std[i] += g;
    }
  }
  backward_accumulate(policy.mlp, out.cache, out_grad, grad.mlp);
}

inline double log_prob_from_output(const PolicyOutput& out,
                                   std::span<const double> action) {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double logp = 0.0;
  for (std::size_t i = 0; i < out.mean.size(); ++i) {
    const double z = (action[i] - out.mean[i]) * std::exp(-out.log_std[i]);
    logp += -0.5 * z * z - out.log_std[i] - half_log_2pi;
  }
  return logp;
}

/// Adds weight * grad(log pi(action|state)) into `grad`; returns log pi.
inline double accumulate_log_prob_grad(const GaussianPolicy& policy,
                                       const PolicyOutput& out,
                                       std::span<const double> action,
                                       double weight, PolicyGrad& grad) {
  const std::size_t A = policy.action_dim();
  std::vector<double> d_mean(A), d_log_std(A);
  for (std::size_t i = 0; i < A; ++i) {
    const double inv_var = std::exp(-2.0 * out.log_std[i]);
    const double diff = action[i] - out.mean[i];
    d_mean[i] = weight * diff * inv_var;
    d_log_std[i] = weight * (diff * diff * inv_var - 1.0);
  }
  accumulate_output_grad(policy, out, d_mean, d_log_std, grad);
  return log_prob_from_output(out, action);
}

struct LogProbResult {
  double logp = 0.0;
  PolicyGrad grad;
};

/// Diagonal-Gaussian log density at `action` and its exact gradient.
inline LogProbResult log_prob(const GaussianPolicy& policy,
                              std::span<const double> state,
                              std::span<const double> action) {
  if (action.size() != policy.action_dim()) {
    throw DimensionError("log_prob: action has " + std::to_string(action.size()) +
                         " entries, policy has " +
                         std::to_string(policy.action_dim()));
  }
  const auto out = evaluate_policy(policy, state);
  LogProbResult r{0.0, PolicyGrad::zeros_like(policy)};
  r.logp = accumulate_log_prob_grad(policy, out, action, 1.0, r.grad);
  return r;
}

/// Differential entropy sum_i (log_std_i + 0.5 * log(2 pi e)).
inline double entropy_from_output(const PolicyOutput& out) {
  const double c = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  double h = 0.0;
  for (double ls : out.log_std) h += ls + c;
  return h;
}

/// Adds weight * grad(entropy) into `grad`; returns the entropy.
inline double accumulate_entropy_grad(const GaussianPolicy& policy,
                                      const PolicyOutput& out, double weight,
                                      PolicyGrad& grad) {
  const std::size_t A = policy.action_dim();
  std::vector<double> d_mean(A, 0.0), d_log_std(A, weight);
  accumulate_output_grad(policy, out, d_mean, d_log_std, grad);
  return entropy_from_output(out);
}

/// a = mu(state) + sigma * z, z ~ N(0, I).
template <typename Rng>
std::vector<double> sample_action(const GaussianPolicy& policy,
                                  std::span<const double> state, Rng& rng) {
  const auto out = evaluate_policy(policy, state);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> a(out.mean.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = out.mean[i] + std::exp(out.log_std[i]) * normal(rng);
  }
  return a;
}

inline std::vector<double> mean_action(const GaussianPolicy& policy,
                                       std::span<const double> state) {
  return evaluate_policy(policy, state).mean;
}

/// Keeps state-independent log-stds inside [-5, 2] after an optimizer step.
inline void project_log_std(GaussianPolicy& policy) {
  for (double& ls : policy.log_std) ls = std::clamp(ls, kLogStdMin, kLogStdMax);
}

}  // namespace dgae
