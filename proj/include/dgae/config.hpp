#pragma once

// Experiment configuration and its line-oriented text format.
//
// One `key = value` per line, keys carry dotted section prefixes
// (env., agent., model., run., sweep.). `#` starts a comment. Lists are
// comma-separated. Reward laws are written as `constant V`,
// `two_atom LOW HIGH P_HIGH` or `truncated_gaussian MEAN SD LO HI`.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dgae/advantage.hpp"
#include "dgae/envs/chain.hpp"
#include "dgae/envs/pointmass.hpp"
#include "dgae/errors.hpp"
#include "dgae/format.hpp"

namespace dgae {

enum class Algorithm { da2c, dppo, a2c, ppo };

inline bool is_distributional(Algorithm a) {
  return a == Algorithm::da2c || a == Algorithm::dppo;
}
inline bool is_ppo_family(Algorithm a) {
  return a == Algorithm::dppo || a == Algorithm::ppo;
}

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::da2c: return "da2c";
    case Algorithm::dppo: return "dppo";
    case Algorithm::a2c: return "a2c";
    case Algorithm::ppo: return "ppo";
  }
  return "?";
}

inline std::optional<Algorithm> parse_algorithm(std::string_view s) {
  if (s == "da2c") return Algorithm::da2c;
  if (s == "dppo") return Algorithm::dppo;
  if (s == "a2c") return Algorithm::a2c;
  if (s == "ppo") return Algorithm::ppo;
  return std::nullopt;
}

struct AgentConfig {
  Algorithm algorithm = Algorithm::dppo;
  GaeParams gae;
  std::size_t rollout_length = 2048;
  double ppo_clip = 0.2;
  std::size_t ppo_epochs = 10;
  std::size_t minibatch_size = 64;
  double entropy_coef = 0.0;
  double value_lr = 3e-4;
  double policy_lr = 3e-4;
  /// Unset means the per-algorithm default: on for (D)PPO, off for (D)A2C.
  std::optional<bool> normalize_advantages;
  double kappa = 1.0;
  double max_grad_norm = 0.5;
  bool state_dependent_std = false;
  double initial_log_std = 0.0;

  bool normalize() const {
    return normalize_advantages.value_or(is_ppo_family(algorithm));
  }

  void validate() const {
    gae.validate();
    if (rollout_length < 2) throw DomainError("AgentConfig: rollout_length must be >= 2");
    if (!(ppo_clip > 0.0 && ppo_clip < 1.0)) {
      throw DomainError("AgentConfig: ppo_clip must lie in (0,1)");
    }
    if (ppo_epochs == 0) throw DomainError("AgentConfig: ppo_epochs must be >= 1");
    if (minibatch_size == 0) throw DomainError("AgentConfig: minibatch_size must be >= 1");
    if (!(entropy_coef >= 0.0)) throw DomainError("AgentConfig: entropy_coef must be >= 0");
    if (!(value_lr > 0.0) || !(policy_lr > 0.0)) {
      throw DomainError("AgentConfig: learning rates must be > 0");
    }
    if (!(kappa > 0.0)) throw DomainError("AgentConfig: kappa must be > 0");
  }

  friend bool operator==(const AgentConfig&, const AgentConfig&) = default;
};

enum class EnvKind { pointmass, chain };

struct ExperimentConfig {
  EnvKind env = EnvKind::pointmass;
  envs::PointMassConfig pointmass;
  envs::ChainConfig chain;
  AgentConfig agent;
  std::size_t quantiles = 64;
  std::size_t hidden = 64;
  std::size_t total_timesteps = 200'000;
  std::size_t eval_interval = 10'000;
  std::size_t eval_episodes = 10;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string output_dir = "out";
  std::vector<double> sweep_gammas;
  std::vector<double> sweep_lambdas;

  /// Quantile count actually used by the value head (1 for scalar critics).
  std::size_t value_outputs() const {
    return is_distributional(agent.algorithm) ? quantiles : 1;
  }

  /// Checks every field; failures name the offending key (line 0, filled in
  /// by the parser).
  void validate() const {
    auto require = [](bool ok, const char* field, const char* what) {
      if (!ok) throw ConfigError(field, 0, what);
    };
    const auto& a = agent;
    require(a.gae.gamma > 0.0 && a.gae.gamma < 1.0, "agent.gamma", "must lie in (0,1)");
    require(a.gae.lambda > 0.0 && a.gae.lambda < 1.0, "agent.lambda", "must lie in (0,1)");
    require(a.rollout_length >= 2, "agent.rollout_length", "must be >= 2");
    require(a.ppo_clip > 0.0 && a.ppo_clip < 1.0, "agent.ppo_clip", "must lie in (0,1)");
    require(a.ppo_epochs >= 1, "agent.ppo_epochs", "must be >= 1");
    require(a.minibatch_size >= 1, "agent.minibatch_size", "must be >= 1");
    require(a.entropy_coef >= 0.0, "agent.entropy_coef", "must be >= 0");
    require(a.value_lr > 0.0, "agent.value_lr", "must be > 0");
    require(a.policy_lr > 0.0, "agent.policy_lr", "must be > 0");
    require(a.kappa > 0.0, "agent.kappa", "must be > 0");
    require(a.max_grad_norm >= 0.0, "agent.max_grad_norm", "must be >= 0 (0 disables clipping)");
    if (env == EnvKind::pointmass) {
      const auto& p = pointmass;
      require(p.noise_std >= 0.0, "env.pointmass.noise_std", "must be >= 0");
      require(p.dt > 0.0, "env.pointmass.dt", "must be > 0");
      require(p.max_force > 0.0, "env.pointmass.max_force", "must be > 0");
      require(p.start_position_range >= 0.0, "env.pointmass.start_position_range", "must be >= 0");
      require(p.start_velocity_range >= 0.0, "env.pointmass.start_velocity_range", "must be >= 0");
      require(p.r_min < 0.0, "env.pointmass.r_min", "must be < 0");
      require(p.action_cost >= 0.0, "env.pointmass.action_cost", "must be >= 0");
      require(p.max_episode_steps > 0, "env.pointmass.max_episode_steps", "must be > 0");
    } else {
      const auto& c = chain;
      require(c.states >= 2, "env.chain.states", "must be >= 2");
      require(c.slip >= 0.0 && c.slip <= 1.0, "env.chain.slip", "must lie in [0,1]");
      require(c.start_state >= -1 && c.start_state < static_cast<int>(c.states) - 1,
              "env.chain.start_state", "must be -1 or a non-terminal state");
      require(c.max_episode_steps > 0, "env.chain.max_episode_steps", "must be > 0");
    }
    require(quantiles >= 1, "model.quantiles", "must be >= 1");
    require(hidden >= 1, "model.hidden", "must be >= 1");
    require(!seeds.empty(), "run.seeds", "must not be empty");
    require(std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() == seeds.size(),
            "run.seeds", "seeds must be distinct");
    require(eval_episodes >= 1, "run.eval_episodes", "must be >= 1");
    require(total_timesteps >= agent.rollout_length, "run.total_timesteps",
            "must be >= agent.rollout_length");
    for (double g : sweep_gammas) require(g > 0.0 && g < 1.0, "sweep.gammas", "entries must lie in (0,1)");
    for (double l : sweep_lambdas) require(l > 0.0 && l < 1.0, "sweep.lambdas", "entries must lie in (0,1)");
  }

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

inline std::string format_reward_law(const envs::RewardLaw& r) {
  using K = envs::RewardLaw::Kind;
  switch (r.kind) {
    case K::constant:
      return "constant " + format_double(r.value);
    case K::two_atom:
      return "two_atom " + format_double(r.value) + " " + format_double(r.high) +
             " " + format_double(r.p_high);
    case K::truncated_gaussian:
      return "truncated_gaussian " + format_double(r.mean) + " " +
             format_double(r.stddev) + " " + format_double(r.lo) + " " +
             format_double(r.hi);
  }
  return "";
}

inline std::optional<envs::RewardLaw> parse_reward_law(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string kind;
  in >> kind;
  std::vector<double> args;
  std::string tok;
  while (in >> tok) {
    auto v = parse_double(tok);
    if (!v) return std::nullopt;
    args.push_back(*v);
  }
  try {
    if (kind == "constant" && args.size() == 1) return envs::RewardLaw::constant(args[0]);
    if (kind == "two_atom" && args.size() == 3) {
      return envs::RewardLaw::two_atom(args[0], args[1], args[2]);
    }
    if (kind == "truncated_gaussian" && args.size() == 4) {
      return envs::RewardLaw::truncated_gaussian(args[0], args[1], args[2], args[3]);
    }
  } catch (const DomainError&) {
    return std::nullopt;
  }
  return std::nullopt;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0) out += ",";
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(xs[i]);
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

inline std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(',', start);
    if (end == std::string_view::npos) end = s.size();
    auto item = trim(s.substr(start, end - start));
    if (!item.empty()) out.push_back(item);
    start = end + 1;
  }
  return out;
}

struct FieldTable {
  using Setter = std::function<bool(ExperimentConfig&, std::string_view)>;
  using Getter = std::function<std::string(const ExperimentConfig&)>;
  struct Field {
    std::string key;
    Setter set;
    Getter get;
  };
  std::vector<Field> fields;

  const Field* find(std::string_view key) const {
    for (const auto& f : fields) {
      if (f.key == key) return &f;
    }
    return nullptr;
  }
};

template <typename Member>
FieldTable::Field real_field(std::string key, Member member) {
  return {std::move(key),
          [member](ExperimentConfig& c, std::string_view v) {
            auto x = parse_double(v);
            if (!x) return false;
            member(c) = *x;
            return true;
          },
          [member](const ExperimentConfig& c) {
            return format_double(member(const_cast<ExperimentConfig&>(c)));
          }};
}

template <typename Member>
FieldTable::Field size_field(std::string key, Member member) {
  return {std::move(key),
          [member](ExperimentConfig& c, std::string_view v) {
            auto x = parse_int<std::size_t>(v);
            if (!x) return false;
            member(c) = *x;
            return true;
          },
          [member](const ExperimentConfig& c) {
            return std::to_string(member(const_cast<ExperimentConfig&>(c)));
          }};
}

inline std::optional<bool> parse_bool(std::string_view v) {
  v = trim(v);
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  return std::nullopt;
}

template <typename Member>
FieldTable::Field bool_field(std::string key, Member member) {
  return {std::move(key),
          [member](ExperimentConfig& c, std::string_view v) {
            auto x = parse_bool(v);
            if (!x) return false;
            member(c) = *x;
            return true;
          },
          [member](const ExperimentConfig& c) {
            return std::string(member(const_cast<ExperimentConfig&>(c)) ? "true" : "false");
          }};
}

template <typename Member>
FieldTable::Field reward_field(std::string key, Member member) {
  return {std::move(key),
          [member](ExperimentConfig& c, std::string_view v) {
            auto x = parse_reward_law(v);
            if (!x) return false;
            member(c) = *x;
            return true;
          },
          [member](const ExperimentConfig& c) {
            return format_reward_law(member(const_cast<ExperimentConfig&>(c)));
          }};
}

template <typename Member>
FieldTable::Field real_list_field(std::string key, Member member) {
  return {std::move(key),
          [member](ExperimentConfig& c, std::string_view v) {
            std::vector<double> xs;
            for (auto item : split_list(v)) {
              auto x = parse_double(item);
              if (!x) return false;
              xs.push_back(*x);
            }
            member(c) = std::move(xs);
            return true;
          },
          [member](const ExperimentConfig& c) {
            return join(member(const_cast<ExperimentConfig&>(c)));
          }};
}

inline const FieldTable& field_table() {
  static const FieldTable table = [] {
    using C = ExperimentConfig;
    FieldTable t;
    t.fields.push_back(
        {"env.name",
         [](C& c, std::string_view v) {
           v = trim(v);
           if (v == "pointmass") c.env = EnvKind::pointmass;
           else if (v == "chain") c.env = EnvKind::chain;
           else return false;
           return true;
         },
         [](const C& c) {
           return std::string(c.env == EnvKind::pointmass ? "pointmass" : "chain");
         }});
    t.fields.push_back(real_field("env.pointmass.noise_std", [](C& c) -> double& { return c.pointmass.noise_std; }));
    t.fields.push_back(real_field("env.pointmass.dt", [](C& c) -> double& { return c.pointmass.dt; }));
    t.fields.push_back(real_field("env.pointmass.max_force", [](C& c) -> double& { return c.pointmass.max_force; }));
    t.fields.push_back(real_field("env.pointmass.start_position_range", [](C& c) -> double& { return c.pointmass.start_position_range; }));
    t.fields.push_back(real_field("env.pointmass.start_velocity_range", [](C& c) -> double& { return c.pointmass.start_velocity_range; }));
    t.fields.push_back(real_field("env.pointmass.r_min", [](C& c) -> double& { return c.pointmass.r_min; }));
    t.fields.push_back(real_field("env.pointmass.action_cost", [](C& c) -> double& { return c.pointmass.action_cost; }));
    t.fields.push_back(size_field("env.pointmass.max_episode_steps", [](C& c) -> std::size_t& { return c.pointmass.max_episode_steps; }));
    t.fields.push_back(size_field("env.chain.states", [](C& c) -> std::size_t& { return c.chain.states; }));
    t.fields.push_back(real_field("env.chain.slip", [](C& c) -> double& { return c.chain.slip; }));
    t.fields.push_back(reward_field("env.chain.step_reward", [](C& c) -> envs::RewardLaw& { return c.chain.step_reward; }));
    t.fields.push_back(reward_field("env.chain.terminal_reward", [](C& c) -> envs::RewardLaw& { return c.chain.terminal_reward; }));
    t.fields.push_back(
        {"env.chain.start_state",
         [](C& c, std::string_view v) {
           auto x = parse_int<int>(v);
           if (!x) return false;
           c.chain.start_state = *x;
           return true;
         },
         [](const C& c) { return std::to_string(c.chain.start_state); }});
    t.fields.push_back(size_field("env.chain.max_episode_steps", [](C& c) -> std::size_t& { return c.chain.max_episode_steps; }));
    t.fields.push_back(
        {"agent.algorithm",
         [](C& c, std::string_view v) {
           auto a = parse_algorithm(trim(v));
           if (!a) return false;
           c.agent.algorithm = *a;
           return true;
         },
         [](const C& c) { return to_string(c.agent.algorithm); }});
    t.fields.push_back(real_field("agent.gamma", [](C& c) -> double& { return c.agent.gae.gamma; }));
    t.fields.push_back(real_field("agent.lambda", [](C& c) -> double& { return c.agent.gae.lambda; }));
    t.fields.push_back(size_field("agent.rollout_length", [](C& c) -> std::size_t& { return c.agent.rollout_length; }));
    t.fields.push_back(real_field("agent.ppo_clip", [](C& c) -> double& { return c.agent.ppo_clip; }));
    t.fields.push_back(size_field("agent.ppo_epochs", [](C& c) -> std::size_t& { return c.agent.ppo_epochs; }));
    t.fields.push_back(size_field("agent.minibatch_size", [](C& c) -> std::size_t& { return c.agent.minibatch_size; }));
    t.fields.push_back(real_field("agent.entropy_coef", [](C& c) -> double& { return c.agent.entropy_coef; }));
    t.fields.push_back(real_field("agent.value_lr", [](C& c) -> double& { return c.agent.value_lr; }));
    t.fields.push_back(real_field("agent.policy_lr", [](C& c) -> double& { return c.agent.policy_lr; }));
    t.fields.push_back(
        {"agent.normalize_advantages",
         [](C& c, std::string_view v) {
           if (trim(v) == "auto") {
             c.agent.normalize_advantages.reset();
             return true;
           }
           auto b = parse_bool(v);
           if (!b) return false;
           c.agent.normalize_advantages = *b;
           return true;
         },
         [](const C& c) {
           if (!c.agent.normalize_advantages) return std::string("auto");
           return std::string(*c.agent.normalize_advantages ? "true" : "false");
         }});
    t.fields.push_back(real_field("agent.kappa", [](C& c) -> double& { return c.agent.kappa; }));
    t.fields.push_back(real_field("agent.max_grad_norm", [](C& c) -> double& { return c.agent.max_grad_norm; }));
    t.fields.push_back(bool_field("agent.state_dependent_std", [](C& c) -> bool& { return c.agent.state_dependent_std; }));
    t.fields.push_back(real_field("agent.initial_log_std", [](C& c) -> double& { return c.agent.initial_log_std; }));
    t.fields.push_back(size_field("model.quantiles", [](C& c) -> std::size_t& { return c.quantiles; }));
    t.fields.push_back(size_field("model.hidden", [](C& c) -> std::size_t& { return c.hidden; }));
    t.fields.push_back(size_field("run.total_timesteps", [](C& c) -> std::size_t& { return c.total_timesteps; }));
    t.fields.push_back(size_field("run.eval_interval", [](C& c) -> std::size_t& { return c.eval_interval; }));
    t.fields.push_back(size_field("run.eval_episodes", [](C& c) -> std::size_t& { return c.eval_episodes; }));
    t.fields.push_back(
        {"run.seeds",
         [](C& c, std::string_view v) {
           std::vector<std::uint64_t> seeds;
           for (auto item : split_list(v)) {
             auto x = parse_int<std::uint64_t>(item);
             if (!x) return false;
             seeds.push_back(*x);
           }
           c.seeds = std::move(seeds);
           return true;
         },
         [](const C& c) { return join(c.seeds); }});
    t.fields.push_back(
        {"run.output_dir",
         [](C& c, std::string_view v) {
           c.output_dir = std::string(trim(v));
           return !c.output_dir.empty();
         },
         [](const C& c) { return c.output_dir; }});
    t.fields.push_back(real_list_field("sweep.gammas", [](C& c) -> std::vector<double>& { return c.sweep_gammas; }));
    t.fields.push_back(real_list_field("sweep.lambdas", [](C& c) -> std::vector<double>& { return c.sweep_lambdas; }));
    return t;
  }();
  return table;
}

}  // namespace detail

/// Applies one `key = value` assignment; throws ConfigError naming the field.
inline void set_config_field(ExperimentConfig& config, std::string_view key,
                             std::string_view value, int line = 0) {
  const auto* field = detail::field_table().find(trim(key));
  if (!field) throw ConfigError(std::string(trim(key)), line, "unknown field");
  if (!field->set(config, value)) {
    throw ConfigError(field->key, line, "invalid value '" + std::string(trim(value)) + "'");
  }
}

/// Parses config text, then validates the result.
inline ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig config;
  std::map<std::string, int> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(std::string(line), line_no, "expected 'key = value'");
    }
    const auto key = std::string(trim(line.substr(0, eq)));
    if (!seen.emplace(key, line_no).second) throw ConfigError(key, line_no, "duplicate field");
    set_config_field(config, key, line.substr(eq + 1), line_no);
  }
  try {
    config.validate();
  } catch (const ConfigError& e) {
    const auto it = seen.find(e.field());
    if (it == seen.end()) throw;
    throw ConfigError(e.field(), it->second, e.reason());
  }
  return config;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", 0, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Writes every field, in a fixed order.
inline std::string serialize_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& f : detail::field_table().fields) {
    out += f.key + " = " + f.get(config) + "\n";
  }
  return out;
}

}  // namespace dgae
