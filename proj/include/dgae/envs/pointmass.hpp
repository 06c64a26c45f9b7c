#pragma once

// 1-D point mass (double integrator) driven by a bounded force.
//
// State (x, v). Each step clips the force a to [-max_force, max_force],
// applies v += dt * (a + noise_std * z), x += dt * v, and pays
// reward = max(r_min, -(x^2 + 0.1 a^2)) evaluated at the pre-step position.
// Episodes end by truncation after max_episode_steps; there is no terminal
// state.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "dgae/envs/env.hpp"
#include "dgae/errors.hpp"

namespace dgae::envs {

struct PointMassConfig {
  double noise_std = 0.05;
  double dt = 0.1;
  double max_force = 1.0;
  double start_position_range = 1.0;
  double start_velocity_range = 0.0;
  double r_min = -10.0;
  double action_cost = 0.1;
  std::size_t max_episode_steps = 200;

  friend bool operator==(const PointMassConfig&, const PointMassConfig&) = default;

  void validate() const {
    if (!(noise_std >= 0.0)) throw DomainError("PointMassConfig: noise_std must be >= 0");
    if (!(dt > 0.0)) throw DomainError("PointMassConfig: dt must be > 0");
    if (!(max_force > 0.0)) throw DomainError("PointMassConfig: max_force must be > 0");
    if (!(r_min < 0.0)) throw DomainError("PointMassConfig: r_min must be < 0");
    if (max_episode_steps == 0) {
      throw DomainError("PointMassConfig: max_episode_steps must be > 0");
    }
  }
};

class PointMassEnv {
 public:
  explicit PointMassEnv(PointMassConfig config, std::uint64_t seed = 0)
      : config_(config), rng_(seed) {
    config_.validate();
  }

  const PointMassConfig& config() const { return config_; }

  EnvSpec spec() const {
    return {2, 1, config_.r_min, 0.0, config_.max_episode_steps};
  }

  void seed(std::uint64_t seed) { rng_.seed(seed); }

  std::vector<double> reset() {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double x = config_.start_position_range * u(rng_);
    const double v = config_.start_velocity_range * u(rng_);
    state_ = {x, v};
    steps_ = 0;
    return {state_[0], state_[1]};
  }

  std::vector<double> reset_to(std::span<const double> state) {
    if (state.size() != 2) throw DimensionError("PointMassEnv::reset_to: state must be (x, v)");
    state_ = {state[0], state[1]};
    steps_ = 0;
    return {state_[0], state_[1]};
  }

  StepResult step(std::span<const double> action) {
    if (action.size() != 1) throw DimensionError("PointMassEnv::step: action must have 1 entry");
    const double a = std::clamp(action[0], -config_.max_force, config_.max_force);
    const double x = state_[0];
    double noise = 0.0;
    if (config_.noise_std > 0.0) {
      std::normal_distribution<double> normal(0.0, config_.noise_std);
      noise = normal(rng_);
    }
    StepResult r;
    r.reward = std::max(config_.r_min, -(x * x + config_.action_cost * a * a));
    state_[1] += config_.dt * (a + noise);
    state_[0] += config_.dt * state_[1];
    ++steps_;
    r.next_state = {state_[0], state_[1]};
    r.done = false;
    r.truncated = steps_ >= config_.max_episode_steps;
    return r;
  }

 private:
  PointMassConfig config_;
  std::mt19937_64 rng_;
  std::array<double, 2> state_{0.0, 0.0};
  std::size_t steps_ = 0;
};

/// Infinite-horizon discrete LQR gain K (a = -K s) for the linearized,
/// unclipped dynamics, from Riccati iteration.
inline std::array<double, 2> lqr_gain(const PointMassConfig& cfg) {
  const double dt = cfg.dt;
  // s' = A s + B a with A = [[1, dt], [0, 1]], B = [dt^2, dt].
  const double a00 = 1.0, a01 = dt, a10 = 0.0, a11 = 1.0;
  const double b0 = dt * dt, b1 = dt;
  const double q0 = 1.0, q1 = 0.0, r = cfg.action_cost;
  double p00 = q0, p01 = 0.0, p11 = q1;
  std::array<double, 2> k{0.0, 0.0};
  for (int it = 0; it < 100000; ++it) {
    // P B
    const double pb0 = p00 * b0 + p01 * b1;
    const double pb1 = p01 * b0 + p11 * b1;
    const double s = r + b0 * pb0 + b1 * pb1;
    // B^T P A
    const double bpa0 = pb0 * a00 + pb1 * a10;
    const double bpa1 = pb0 * a01 + pb1 * a11;
    k = {bpa0 / s, bpa1 / s};
    // A^T P A
    const double pa00 = p00 * a00 + p01 * a10, pa01 = p00 * a01 + p01 * a11;
    const double pa10 = p01 * a00 + p11 * a10, pa11 = p01 * a01 + p11 * a11;
    const double apa00 = a00 * pa00 + a10 * pa10;
    const double apa01 = a00 * pa01 + a10 * pa11;
    const double apa11 = a01 * pa01 + a11 * pa11;
    const double n00 = q0 + apa00 - bpa0 * bpa0 / s;
    const double n01 = apa01 - bpa0 * bpa1 / s;
    const double n11 = q1 + apa11 - bpa1 * bpa1 / s;
    const double change = std::abs(n00 - p00) + std::abs(n01 - p01) + std::abs(n11 - p11);
    p00 = n00;
    p01 = n01;
    p11 = n11;
    if (change < 1e-12) break;
  }
  return k;
}

}  // namespace dgae::envs
