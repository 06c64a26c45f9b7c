#pragma once

// Distributional TD errors, n-step advantage estimators, and the
// exponentially weighted distributional GAE, plus the scalar GAE baseline.
//
// Boundary handling: a step flagged `done` bootstraps from the zero
// distribution; a step flagged `truncated` (time limit) bootstraps from the
// value prediction stored for its true next state in `timeout_dists`; the
// last step of the buffer bootstraps from value_dists[T]. Every episode
// boundary resets the backward recursion.

#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dgae/errors.hpp"
#include "dgae/format.hpp"
#include "dgae/quantile.hpp"

namespace dgae {

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
  bool done = false;
  bool truncated = false;

  bool ends_episode() const { return done || truncated; }
};

struct GaeParams {
  double gamma = 0.99;
  double lambda = 0.95;

  friend bool operator==(const GaeParams&, const GaeParams&) = default;

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) {
      throw DomainError("GaeParams: gamma must lie in (0,1)");
    }
    if (!(lambda > 0.0 && lambda < 1.0)) {
      throw DomainError("GaeParams: lambda must lie in (0,1)");
    }
  }
};

struct RolloutBuffer {
  std::vector<Transition> transitions;
  /// Predictions for s_0..s_T; index T is the bootstrap state.
  std::vector<QuantileDistribution> value_dists;
  /// Scalar predictions for s_0..s_T (baseline agents).
  std::optional<std::vector<double>> scalar_values;
  /// Behaviour-policy log-probabilities recorded at collection time.
  std::vector<double> log_probs;
  /// Bootstrap predictions for the true next state of truncated steps.
  std::map<std::size_t, QuantileDistribution> timeout_dists;
  std::map<std::size_t, double> timeout_values;

  std::size_t size() const { return transitions.size(); }

  void validate() const {
    if (value_dists.size() != transitions.size() + 1) {
      throw DimensionError("RolloutBuffer: need T+1 value distributions, got " +
                           std::to_string(value_dists.size()) + " for T=" +
                           std::to_string(transitions.size()));
    }
    for (const auto& g : value_dists) {
      if (g.size() != value_dists.front().size()) {
        throw DimensionError("RolloutBuffer: mixed quantile counts");
      }
    }
    if (scalar_values && scalar_values->size() != transitions.size() + 1) {
      throw DimensionError("RolloutBuffer: need T+1 scalar values");
    }
    if (!log_probs.empty() && log_probs.size() != transitions.size()) {
      throw DimensionError("RolloutBuffer: need T log-probabilities");
    }
  }

  /// Replaces scalar_values (and timeout values) by the means of the
  /// stored distributions.
  void set_scalar_values_from_means() {
    std::vector<double> values;
    values.reserve(value_dists.size());
    for (const auto& g : value_dists) values.push_back(mean(g));
    scalar_values = std::move(values);
    timeout_values.clear();
    for (const auto& [t, g] : timeout_dists) timeout_values[t] = mean(g);
  }

  const QuantileDistribution& timeout_dist(std::size_t t) const {
    auto it = timeout_dists.find(t);
    if (it == timeout_dists.end()) {
      throw StateError("RolloutBuffer: truncated step " + std::to_string(t) +
                       " has no bootstrap distribution");
    }
    return it->second;
  }

  double timeout_value(std::size_t t) const {
    auto it = timeout_values.find(t);
    if (it == timeout_values.end()) {
      throw StateError("RolloutBuffer: truncated step " + std::to_string(t) +
                       " has no bootstrap value");
    }
    return it->second;
  }
};

/// delta = r + d(gamma * G(s'), G(s)), with the zero distribution standing in
/// for G(s') on terminal steps.
template <typename Metric = DirectionalMetric>
double distributional_td_error(double reward, const QuantileDistribution& g_next,
                               const QuantileDistribution& g_cur, double gamma,
                               bool done, const Metric& metric = {}) {
  if (g_next.size() != g_cur.size()) {
    throw DimensionError("distributional_td_error: quantile counts differ");
  }
  if (done) {
    return reward + metric(QuantileDistribution::constant(g_cur.size(), 0.0),
                           g_cur);
  }
  return reward + metric(scale(g_next, gamma), g_cur);
}

template <typename Metric = DirectionalMetric>
std::vector<double> distributional_td_errors(const RolloutBuffer& buffer,
                                             double gamma,
                                             const Metric& metric = {}) {
  buffer.validate();
  const std::size_t T = buffer.size();
  std::vector<double> deltas(T);
  for (std::size_t t = 0; t < T; ++t) {
    const auto& tr = buffer.transitions[t];
    const auto& next =
        (tr.truncated && !tr.done) ? buffer.timeout_dist(t) : buffer.value_dists[t + 1];
    deltas[t] = distributional_td_error(tr.reward, next, buffer.value_dists[t],
                                        gamma, tr.done, metric);
  }
  return deltas;
}

/// n-step estimator: sum_{k<n} gamma^k r_{t+k} + d(gamma^n G(s_{t+n}), G(s_t)).
///
/// A window that crosses an episode boundary stops there: the discounted
/// reward sum ends at the boundary step and the bootstrap is the zero
/// distribution (done) or the stored timeout prediction (truncated).
template <typename Metric = DirectionalMetric>
double n_step_advantage(const RolloutBuffer& buffer, std::size_t start,
                        std::size_t n, double gamma, const Metric& metric = {}) {
  buffer.validate();
  if (n == 0) throw DomainError("n_step_advantage: n must be >= 1");
  if (start >= buffer.size() || n > buffer.size() - start) {
    throw IndexError("n_step_advantage: window [" + std::to_string(start) +
                     ", " + std::to_string(start + n) + ") exceeds buffer of " +
                     std::to_string(buffer.size()));
  }
  const auto& current = buffer.value_dists[start];
  double rewards = 0.0;
  double discount = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& tr = buffer.transitions[start + k];
    rewards += discount * tr.reward;
    discount *= gamma;
    if (tr.done) {
      return rewards +
             metric(QuantileDistribution::constant(current.size(), 0.0), current);
    }
    if (tr.truncated) {
      return rewards + metric(scale(buffer.timeout_dist(start + k), discount),
                              current);
    }
  }
  return rewards + metric(scale(buffer.value_dists[start + n], discount), current);
}

/// A_t = delta_t + gamma * lambda * (1 - boundary_t) * A_{t+1}.
inline std::vector<double> backward_gae(std::span<const double> deltas,
                                        const std::vector<Transition>& transitions,
                                        const GaeParams& params) {
  const std::size_t T = deltas.size();
  std::vector<double> adv(T);
  const double decay = params.gamma * params.lambda;
  double running = 0.0;
  for (std::size_t i = T; i-- > 0;) {
    if (transitions[i].ends_episode()) running = 0.0;
    running = deltas[i] + decay * running;
    adv[i] = running;
  }
  return adv;
}

/// Distributional GAE over the whole buffer.
template <typename Metric = DirectionalMetric>
std::vector<double> dgae(const RolloutBuffer& buffer, const GaeParams& params,
                         const Metric& metric = {}) {
  params.validate();
  const auto deltas = distributional_td_errors(buffer, params.gamma, metric);
  return backward_gae(deltas, buffer.transitions, params);
}

inline std::vector<double> scalar_td_errors(const RolloutBuffer& buffer,
                                            double gamma) {
  if (!buffer.scalar_values) {
    throw StateError("scalar_gae: buffer has no scalar values");
  }
  const auto& v = *buffer.scalar_values;
  if (v.size() != buffer.size() + 1) {
    throw DimensionError("scalar_gae: need T+1 scalar values");
  }
  const std::size_t T = buffer.size();
  std::vector<double> deltas(T);
  for (std::size_t t = 0; t < T; ++t) {
    const auto& tr = buffer.transitions[t];
    double next = 0.0;
    if (!tr.done) next = tr.truncated ? buffer.timeout_value(t) : v[t + 1];
    deltas[t] = tr.reward + gamma * next - v[t];
  }
  return deltas;
}

/// Classic GAE on scalar value predictions, same truncation rules as dgae.
inline std::vector<double> scalar_gae(const RolloutBuffer& buffer,
                                      const GaeParams& params) {
  params.validate();
  const auto deltas = scalar_td_errors(buffer, params.gamma);
  return backward_gae(deltas, buffer.transitions, params);
}

/// In-place zero-mean, unit-std normalization (population std, eps 1e-8).
inline void normalize_advantages(std::span<double> adv) {
  if (adv.empty()) return;
  double mu = 0.0;
  for (double a : adv) mu += a;
  mu /= static_cast<double>(adv.size());
  double var = 0.0;
  for (double a : adv) var += (a - mu) * (a - mu);
  var /= static_cast<double>(adv.size());
  const double denom = std::sqrt(var) + 1e-8;
  for (double& a : adv) a = (a - mu) / denom;
}

/// Debug dump: step,reward,delta,advantage.
inline void write_advantage_csv(const std::string& path,
                                const RolloutBuffer& buffer,
                                std::span<const double> deltas,
                                std::span<const double> advantages) {
  if (deltas.size() != buffer.size() || advantages.size() != buffer.size()) {
    throw DimensionError("write_advantage_csv: length mismatch");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "step,reward,delta,advantage\n";
  for (std::size_t t = 0; t < buffer.size(); ++t) {
    out << t << ',' << format_double(buffer.transitions[t].reward) << ','
        << format_double(deltas[t]) << ',' << format_double(advantages[t])
        << '\n';
  }
}

}  // namespace dgae
