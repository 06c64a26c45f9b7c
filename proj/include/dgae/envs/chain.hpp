#pragma once

// K-state chain MDP with fully declared transition and reward laws, plus the
// exact return-distribution oracle built by enumerating outcomes.
//
// States 0..K-1, state K-1 is terminal. The sign of action[0] picks the
// intended direction (>= 0 is right); with probability `slip` the move goes
// the other way. Moving left from state 0 stays at 0. Entering the terminal
// state draws from `terminal_reward`; every other transition draws from
// `step_reward`.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dgae/envs/env.hpp"
#include "dgae/errors.hpp"
#include "dgae/quantile.hpp"

namespace dgae::envs {

struct RewardLaw {
  enum class Kind { constant, two_atom, truncated_gaussian };

  Kind kind = Kind::constant;
  double value = 0.0;  // constant value, or the low atom
  double high = 0.0;   // high atom
  double p_high = 0.0;
  double mean = 0.0;   // truncated gaussian parameters
  double stddev = 0.0;
  double lo = 0.0;
  double hi = 0.0;

  static RewardLaw constant(double v) {
    RewardLaw r;
    r.kind = Kind::constant;
    r.value = v;
    return r;
  }
  static RewardLaw two_atom(double low, double high, double p_high) {
    if (!(p_high >= 0.0 && p_high <= 1.0) || low > high) {
      throw DomainError("RewardLaw::two_atom: need low <= high and p in [0,1]");
    }
    RewardLaw r;
    r.kind = Kind::two_atom;
    r.value = low;
    r.high = high;
    r.p_high = p_high;
    return r;
  }
  static RewardLaw truncated_gaussian(double mean, double stddev, double lo,
                                      double hi) {
    if (!(stddev > 0.0) || !(lo < hi) || mean < lo || mean > hi) {
      throw DomainError("RewardLaw::truncated_gaussian: need sd > 0, lo < mean < hi");
    }
    RewardLaw r;
    r.kind = Kind::truncated_gaussian;
    r.mean = mean;
    r.stddev = stddev;
    r.lo = lo;
    r.hi = hi;
    return r;
  }

  double support_min() const {
    switch (kind) {
      case Kind::constant: return value;
      case Kind::two_atom: return value;
      case Kind::truncated_gaussian: return lo;
    }
    return value;
  }
  double support_max() const {
    switch (kind) {
      case Kind::constant: return value;
      case Kind::two_atom: return high;
      case Kind::truncated_gaussian: return hi;
    }
    return value;
  }

  bool enumerable() const { return kind != Kind::truncated_gaussian; }

  /// Finite support as (value, probability); zero-probability atoms dropped.
  std::vector<std::pair<double, double>> atoms() const {
    switch (kind) {
      case Kind::constant:
        return {{value, 1.0}};
      case Kind::two_atom: {
        std::vector<std::pair<double, double>> out;
        if (p_high < 1.0) out.emplace_back(value, 1.0 - p_high);
        if (p_high > 0.0) out.emplace_back(high, p_high);
        return out;
      }
      case Kind::truncated_gaussian:
        break;
    }
    throw DomainError("RewardLaw: truncated gaussian has no finite atoms");
  }

  double expected() const {
    switch (kind) {
      case Kind::constant: return value;
      case Kind::two_atom: return (1.0 - p_high) * value + p_high * high;
      case Kind::truncated_gaussian: {
        const double a = (lo - mean) / stddev;
        const double b = (hi - mean) / stddev;
        const auto pdf = [](double x) {
          return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
        };
        const auto cdf = [](double x) {
          return 0.5 * std::erfc(-x / std::numbers::sqrt2);
        };
        return mean + stddev * (pdf(a) - pdf(b)) / (cdf(b) - cdf(a));
      }
    }
    return value;
  }

  friend bool operator==(const RewardLaw&, const RewardLaw&) = default;

  template <typename Rng>
  double sample(Rng& rng) const {
    switch (kind) {
      case Kind::constant:
        return value;
      case Kind::two_atom: {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        return u(rng) < p_high ? high : value;
      }
      case Kind::truncated_gaussian: {
        std::normal_distribution<double> normal(mean, stddev);
        for (;;) {
          const double x = normal(rng);
          if (x >= lo && x <= hi) return x;
        }
      }
    }
    return value;
  }
};

struct ChainConfig {
  std::size_t states = 5;
  double slip = 0.0;
  RewardLaw step_reward = RewardLaw::constant(0.0);
  RewardLaw terminal_reward = RewardLaw::constant(1.0);
  /// Initial state; -1 draws uniformly over the non-terminal states.
  int start_state = 0;
  std::size_t max_episode_steps = 100;

  friend bool operator==(const ChainConfig&, const ChainConfig&) = default;

  void validate() const {
    if (states < 2) throw DomainError("ChainConfig: need at least 2 states");
    if (!(slip >= 0.0 && slip <= 1.0)) throw DomainError("ChainConfig: slip must lie in [0,1]");
    if (start_state < -1 || start_state >= static_cast<int>(states) - 1) {
      throw DomainError("ChainConfig: start_state must be -1 or non-terminal");
    }
    if (max_episode_steps == 0) throw DomainError("ChainConfig: max_episode_steps must be > 0");
  }
};

/// Stationary stochastic policy over {left, right}: p_right[s] per state.
struct ChainPolicy {
  std::vector<double> p_right;

  template <typename Rng>
  std::vector<double> operator()(std::span<const double> obs, Rng& rng) const {
    const auto s = static_cast<std::size_t>(
        std::max_element(obs.begin(), obs.end()) - obs.begin());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return {u(rng) < p_right.at(s) ? 1.0 : -1.0};
  }
};

class ChainMdp {
 public:
  explicit ChainMdp(ChainConfig config, std::uint64_t seed = 0)
      : config_(std::move(config)), rng_(seed) {
    config_.validate();
  }

  const ChainConfig& config() const { return config_; }
  std::size_t num_states() const { return config_.states; }
  std::size_t terminal_state() const { return config_.states - 1; }

  EnvSpec spec() const {
    EnvSpec s;
    s.state_dim = config_.states;
    s.action_dim = 1;
    s.r_min = std::min(config_.step_reward.support_min(),
                       config_.terminal_reward.support_min());
    s.r_max = std::max(config_.step_reward.support_max(),
                       config_.terminal_reward.support_max());
    s.max_episode_steps = config_.max_episode_steps;
    return s;
  }

  void seed(std::uint64_t seed) { rng_.seed(seed); }

  std::vector<double> observation(std::size_t s) const {
    std::vector<double> obs(config_.states, 0.0);
    obs.at(s) = 1.0;
    return obs;
  }

  std::size_t position() const { return position_; }

  std::vector<double> reset() {
    if (config_.start_state >= 0) {
      position_ = static_cast<std::size_t>(config_.start_state);
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, config_.states - 2);
      position_ = pick(rng_);
    }
    steps_ = 0;
    return observation(position_);
  }

  /// Accepts a one-hot observation.
  std::vector<double> reset_to(std::span<const double> state) {
    if (state.size() != config_.states) {
      throw DimensionError("ChainMdp::reset_to: state must be one-hot of length K");
    }
    position_ = static_cast<std::size_t>(
        std::max_element(state.begin(), state.end()) - state.begin());
    if (position_ == terminal_state()) {
      throw DomainError("ChainMdp::reset_to: cannot start in the terminal state");
    }
    steps_ = 0;
    return observation(position_);
  }

  std::size_t move(std::size_t s, bool right) const {
    if (right) return s + 1;
    return s == 0 ? 0 : s - 1;
  }

  StepResult step(std::span<const double> action) {
    if (action.size() != 1) throw DimensionError("ChainMdp::step: action must have 1 entry");
    if (position_ == terminal_state()) {
      throw StateError("ChainMdp::step: episode already terminated; call reset()");
    }
    bool right = action[0] >= 0.0;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (config_.slip > 0.0 && u(rng_) < config_.slip) right = !right;
    position_ = move(position_, right);
    ++steps_;
    StepResult r;
    r.done = position_ == terminal_state();
    r.reward = r.done ? config_.terminal_reward.sample(rng_)
                      : config_.step_reward.sample(rng_);
    r.truncated = !r.done && steps_ >= config_.max_episode_steps;
    r.next_state = observation(position_);
    return r;
  }

 private:
  ChainConfig config_;
  std::mt19937_64 rng_;
  std::size_t position_ = 0;
  std::size_t steps_ = 0;
};

/// A finite discrete distribution of discounted returns.
struct ReturnAtoms {
  std::vector<std::pair<double, double>> atoms;  // (return, probability)

  double mean() const {
    double m = 0.0;
    for (const auto& [v, p] : atoms) m += v * p;
    return m;
  }
  QuantileDistribution quantiles(std::size_t n) const {
    return QuantileDistribution::from_atoms(atoms, n);
  }
};

/// Enumerates every trajectory outcome of `policy` from each start state up to
/// `horizon` steps. Outcomes reaching the same state with bitwise-equal
/// partial returns are merged. Trajectories still running at the horizon keep
/// their partial return. Throws if more than `max_outcomes` live atoms exist.
inline std::vector<ReturnAtoms> exact_return_atoms(const ChainMdp& env,
                                                   const ChainPolicy& policy,
                                                   double gamma,
                                                   std::size_t horizon,
                                                   std::size_t max_outcomes = 1'000'000) {
  const auto& cfg = env.config();
  if (!cfg.step_reward.enumerable() || !cfg.terminal_reward.enumerable()) {
    throw DomainError("exact_return_atoms: reward laws must have finite support");
  }
  if (policy.p_right.size() < cfg.states - 1) {
    throw DimensionError("exact_return_atoms: policy table too short");
  }
  const auto step_atoms = cfg.step_reward.atoms();
  const auto term_atoms = cfg.terminal_reward.atoms();
  const std::size_t K = cfg.states;
  std::vector<ReturnAtoms> result(K);
  result[K - 1].atoms = {{0.0, 1.0}};

  for (std::size_t start = 0; start + 1 < K; ++start) {
    std::vector<std::map<double, double>> live(K);
    live[start][0.0] = 1.0;
    std::map<double, double> finished;
    double discount = 1.0;
    for (std::size_t k = 0; k < horizon; ++k) {
      std::vector<std::map<double, double>> next(K);
      std::size_t count = 0;
      for (std::size_t s = 0; s + 1 < K; ++s) {
        for (const auto& [acc, prob] : live[s]) {
          const double pr = policy.p_right[s];
          for (int intended = 0; intended < 2; ++intended) {
            const double p_dir = intended ? pr : 1.0 - pr;
            if (p_dir == 0.0) continue;
            for (int slipped = 0; slipped < 2; ++slipped) {
              const double p_slip = slipped ? cfg.slip : 1.0 - cfg.slip;
              if (p_slip == 0.0) continue;
              const bool right = (intended == 1) != (slipped == 1);
              const std::size_t s2 = env.move(s, right);
              const bool terminal = s2 == K - 1;
              for (const auto& [r, p_r] : terminal ? term_atoms : step_atoms) {
                const double p = prob * p_dir * p_slip * p_r;
                const double ret = acc + discount * r;
                if (terminal) {
                  finished[ret] += p;
                } else {
                  next[s2][ret] += p;
                }
              }
            }
          }
        }
      }
      for (const auto& m : next) count += m.size();
      if (count > max_outcomes) {
        throw DomainError("exact_return_atoms: more than " +
                          std::to_string(max_outcomes) + " live outcomes");
      }
      live = std::move(next);
      discount *= gamma;
    }
    for (const auto& m : live) {
      for (const auto& [acc, prob] : m) finished[acc] += prob;
    }
    result[start].atoms.assign(finished.begin(), finished.end());
  }
  return result;
}

/// Midpoint quantiles of the exact return distribution for every state
/// (the terminal state maps to a point mass at 0).
inline std::vector<QuantileDistribution> exact_return_distribution(
    const ChainMdp& env, const ChainPolicy& policy, double gamma,
    std::size_t horizon, std::size_t n_quantiles,
    std::size_t max_outcomes = 1'000'000) {
  const auto atoms = exact_return_atoms(env, policy, gamma, horizon, max_outcomes);
  std::vector<QuantileDistribution> out;
  out.reserve(atoms.size());
  for (const auto& a : atoms) out.push_back(a.quantiles(n_quantiles));
  return out;
}

/// Classic tabular policy evaluation of V(s) by fixed-point iteration.
inline std::vector<double> tabular_policy_evaluation(const ChainMdp& env,
                                                     const ChainPolicy& policy,
                                                     double gamma,
                                                     double tol = 1e-13,
                                                     std::size_t max_iters = 1'000'000) {
  const auto& cfg = env.config();
  const std::size_t K = cfg.states;
  const double r_step = cfg.step_reward.expected();
  const double r_term = cfg.terminal_reward.expected();
  std::vector<double> v(K, 0.0);
  for (std::size_t it = 0; it < max_iters; ++it) {
    double change = 0.0;
    std::vector<double> nv(K, 0.0);
    for (std::size_t s = 0; s + 1 < K; ++s) {
      double total = 0.0;
      for (int intended = 0; intended < 2; ++intended) {
        const double p_dir = intended ? policy.p_right[s] : 1.0 - policy.p_right[s];
        for (int slipped = 0; slipped < 2; ++slipped) {
          const double p = p_dir * (slipped ? cfg.slip : 1.0 - cfg.slip);
          const bool right = (intended == 1) != (slipped == 1);
          const std::size_t s2 = env.move(s, right);
          total += p * (s2 == K - 1 ? r_term : r_step + gamma * v[s2]);
        }
      }
      nv[s] = total;
      change = std::max(change, std::abs(nv[s] - v[s]));
    }
    v = std::move(nv);
    if (change < tol) break;
  }
  return v;
}

}  // namespace dgae::envs
