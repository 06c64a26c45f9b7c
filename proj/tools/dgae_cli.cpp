// dgae command line: train, verify, sweep, eval.
//
// Exit status: 0 success, 1 run or check failure, 2 usage or config error.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dgae/checkpoint.hpp"
#include "dgae/config.hpp"
#include "dgae/harness.hpp"
#include "dgae/io.hpp"
#include "dgae/verify/verify.hpp"

namespace {

struct RunOptions {
  std::string config_path;
  std::string out;
  std::string seeds;
  std::size_t jobs = 1;
};

void add_run_options(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("--config", o.config_path, "experiment config file")->required();
  cmd->add_option("--out", o.out, "output directory (overrides run.output_dir)");
  cmd->add_option("--seeds", o.seeds, "comma separated seeds (overrides run.seeds)");
  cmd->add_option("--jobs", o.jobs, "seeds trained in parallel")->check(CLI::PositiveNumber);
}

dgae::ExperimentConfig resolve_config(const RunOptions& o) {
  auto config = dgae::load_config(o.config_path);
  if (!o.out.empty()) dgae::set_config_field(config, "run.output_dir", o.out);
  if (!o.seeds.empty()) dgae::set_config_field(config, "run.seeds", o.seeds);
  config.validate();
  return config;
}

void save_resolved_config(const dgae::ExperimentConfig& config) {
  dgae::write_file_atomic((std::filesystem::path(config.output_dir) / "config.cfg").string(),
                          dgae::serialize_config(config));
}

std::vector<double> parse_grid(const std::string& text, const std::string& field) {
  dgae::ExperimentConfig scratch;
  dgae::set_config_field(scratch, field, text);
  return field == "sweep.gammas" ? scratch.sweep_gammas : scratch.sweep_lambdas;
}

int cmd_train(const RunOptions& o) {
  const auto config = resolve_config(o);
  save_resolved_config(config);
  const auto report = dgae::run_training(config, o.jobs);
  for (const auto& c : report.curves) {
    const auto& last = c.points.back();
    std::cout << "seed " << c.seed << ": final mean return "
              << dgae::format_double(last.mean_return) << " at " << last.timesteps << " steps\n";
  }
  std::cout << "wrote " << config.output_dir << "\n";
  return 0;
}

int cmd_verify() {
  const auto results = dgae::verify::run_suite();
  dgae::verify::print_table(std::cout, results);
  double total = 0.0;
  for (const auto& r : results) total += r.seconds;
  std::cout << "total " << dgae::format_double(std::round(total * 1000) / 1000) << "s\n";
  return dgae::verify::all_passed(results) ? 0 : 1;
}

int cmd_sweep(const RunOptions& o, const std::string& gammas, const std::string& lambdas) {
  auto config = resolve_config(o);
  if (!gammas.empty()) config.sweep_gammas = parse_grid(gammas, "sweep.gammas");
  if (!lambdas.empty()) config.sweep_lambdas = parse_grid(lambdas, "sweep.lambdas");
  save_resolved_config(config);
  const auto rows = dgae::run_sweep(config, config.sweep_gammas, config.sweep_lambdas, o.jobs);
  for (const auto& r : rows) {
    std::cout << "gamma " << dgae::format_double(r.gamma) << " lambda "
              << dgae::format_double(r.lambda) << ": final mean return "
              << dgae::format_double(r.final_mean_return) << "\n";
  }
  return 0;
}

int cmd_eval(const RunOptions& o, const std::string& checkpoint, std::size_t episodes) {
  const auto config = resolve_config(o);
  const auto agent = dgae::load_checkpoint(checkpoint);
  const std::size_t n = episodes > 0 ? episodes : config.eval_episodes;
  const auto stats =
      dgae::evaluate_policy_returns(config, agent.policy, config.seeds.front(), n);
  std::cout << "mean_return " << dgae::format_double(stats.mean) << "\n"
            << "std_return " << dgae::format_double(stats.std) << "\n"
            << "episodes " << n << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributional GAE agents, environments, and experiment harness"};
  app.require_subcommand(1);

  RunOptions train_opts, sweep_opts, eval_opts;
  auto* train = app.add_subcommand("train", "train every seed of a config");
  add_run_options(train, train_opts);

  app.add_subcommand("verify", "run the oracle and property checks");

  auto* sweep = app.add_subcommand("sweep", "train over a gamma x lambda grid");
  add_run_options(sweep, sweep_opts);
  std::string gammas, lambdas;
  sweep->add_option("--gammas", gammas, "comma separated gammas (overrides sweep.gammas)");
  sweep->add_option("--lambdas", lambdas, "comma separated lambdas (overrides sweep.lambdas)");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint with the deterministic policy");
  add_run_options(eval, eval_opts);
  std::string checkpoint;
  std::size_t episodes = 0;
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--episodes", episodes, "episodes (default run.eval_episodes)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) return cmd_train(train_opts);
    if (sweep->parsed()) return cmd_sweep(sweep_opts, gammas, lambdas);
    if (eval->parsed()) return cmd_eval(eval_opts, checkpoint, episodes);
    return cmd_verify();
  } catch (const dgae::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
