#pragma once

#include <concepts>
#include <cstdint>
#include <span>
#include <vector>

namespace dgae::envs {

struct EnvSpec {
  std::size_t state_dim = 1;
  std::size_t action_dim = 1;
  double r_min = 0.0;
  double r_max = 0.0;
  std::size_t max_episode_steps = 1;
};

/// `done` marks true termination (zero bootstrap); `truncated` marks the time
/// limit (bootstrap from the next state's value).
struct StepResult {
  std::vector<double> next_state;
  double reward = 0.0;
  bool done = false;
  bool truncated = false;
};

template <typename E>
concept Environment = requires(E env, const E cenv, std::span<const double> v,
                               std::uint64_t seed) {
  { cenv.spec() } -> std::convertible_to<EnvSpec>;
  { env.seed(seed) };
  { env.reset() } -> std::convertible_to<std::vector<double>>;
  { env.reset_to(v) } -> std::convertible_to<std::vector<double>>;
  { env.step(v) } -> std::convertible_to<StepResult>;
};

}  // namespace dgae::envs
