#pragma once

// Text checkpoint of a trained actor-critic.
//
// Layout (one item per line, values space separated, shortest round-trip
// decimals):
//
//   dgae-checkpoint 1
//   distributional <0|1>
//   state_dependent_std <0|1>
//   policy.widths <count> <w0> <w1> ...
//   policy.params <count> <v0> <v1> ...
//   policy.log_std <count> <v0> ...
//   value.widths <count> <w0> <w1> ...
//   value.params <count> <v0> <v1> ...
//
// Optimizer state is not stored; a loaded agent is for evaluation.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dgae/agents.hpp"
#include "dgae/errors.hpp"
#include "dgae/format.hpp"
#include "dgae/io.hpp"

namespace dgae {

namespace detail {

template <typename T>
void write_array(std::ostream& out, const std::string& name, const std::vector<T>& xs) {
  out << name << ' ' << xs.size();
  for (const auto& x : xs) {
    if constexpr (std::is_floating_point_v<T>) {
      out << ' ' << format_double(x);
    } else {
      out << ' ' << x;
    }
  }
  out << '\n';
}

template <typename T>
std::vector<T> read_array(std::istream& in, const std::string& name) {
  std::string tag;
  std::size_t count = 0;
  if (!(in >> tag) || tag != name || !(in >> count)) {
    throw StateError("checkpoint: expected '" + name + "'");
  }
  std::vector<T> xs(count);
  for (auto& x : xs) {
    std::string tok;
    if (!(in >> tok)) throw StateError("checkpoint: truncated '" + name + "'");
    if constexpr (std::is_floating_point_v<T>) {
      auto v = parse_double(tok);
      if (!v) throw StateError("checkpoint: bad value in '" + name + "'");
      x = *v;
    } else {
      auto v = parse_int<T>(tok);
      if (!v) throw StateError("checkpoint: bad value in '" + name + "'");
      x = *v;
    }
  }
  return xs;
}

inline std::size_t read_flag(std::istream& in, const std::string& name) {
  std::string tag;
  std::size_t v = 0;
  if (!(in >> tag) || tag != name || !(in >> v)) {
    throw StateError("checkpoint: expected '" + name + "'");
  }
  return v;
}

}  // namespace detail

inline std::string serialize_checkpoint(const ActorCritic& agent) {
  std::ostringstream out;
  out << "dgae-checkpoint 1\n";
  out << "distributional " << (agent.distributional ? 1 : 0) << '\n';
  out << "state_dependent_std " << (agent.policy.state_dependent_std ? 1 : 0) << '\n';
  detail::write_array(out, "policy.widths", agent.policy.mlp.widths);
  detail::write_array(out, "policy.params", agent.policy.mlp.data);
  detail::write_array(out, "policy.log_std", agent.policy.log_std);
  detail::write_array(out, "value.widths", agent.value_net.widths);
  detail::write_array(out, "value.params", agent.value_net.data);
  return out.str();
}

inline ActorCritic parse_checkpoint(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "dgae-checkpoint" || version != 1) {
    throw StateError("checkpoint: unrecognized header");
  }
  ActorCritic agent;
  agent.distributional = detail::read_flag(in, "distributional") != 0;
  agent.policy.state_dependent_std = detail::read_flag(in, "state_dependent_std") != 0;
  agent.policy.mlp.widths = detail::read_array<std::size_t>(in, "policy.widths");
  agent.policy.mlp.data = detail::read_array<double>(in, "policy.params");
  agent.policy.log_std = detail::read_array<double>(in, "policy.log_std");
  agent.value_net.widths = detail::read_array<std::size_t>(in, "value.widths");
  agent.value_net.data = detail::read_array<double>(in, "value.params");
  agent.policy.mlp.validate();
  agent.value_net.validate();
  if (!agent.policy.state_dependent_std &&
      agent.policy.log_std.size() != agent.policy.mlp.output_dim()) {
    throw DimensionError("checkpoint: log_std size does not match the policy head");
  }
  return agent;
}

inline void save_checkpoint(const std::string& path, const ActorCritic& agent) {
  write_file_atomic(path, serialize_checkpoint(agent));
}

inline ActorCritic load_checkpoint(const std::string& path) {
  return parse_checkpoint(read_file(path));
}

}  // namespace dgae
