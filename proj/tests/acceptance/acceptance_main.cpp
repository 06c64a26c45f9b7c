// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
// failure. argv[1] is a scratch directory for training artifacts.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "dgae/harness.hpp"
#include "dgae/io.hpp"
#include "dgae/verify/verify.hpp"

namespace fs = std::filesystem;
using dgae::format_double;
using dgae::verify::CheckResult;
using dgae::verify::Outcome;

namespace {

std::string fmt(double x, int digits = 3) {
  const double s = std::pow(10.0, digits);
  return format_double(std::round(x * s) / s);
}

Outcome gradient_checks() {
  const auto qh = dgae::verify::check_quantile_huber_gradient(100, 1e-5);
  const auto mlp = dgae::verify::check_mlp_gradient(100, 1e-5);
  const auto lp = dgae::verify::check_log_prob_gradient(100, 1e-5);
  return {qh.ok && mlp.ok && lp.ok,
          "quantile-huber: " + qh.detail + "; mlp: " + mlp.detail + "; log-prob: " + lp.detail};
}

dgae::ExperimentConfig pointmass_config(dgae::Algorithm algo, const fs::path& dir) {
  dgae::ExperimentConfig c;
  c.env = dgae::EnvKind::pointmass;
  c.pointmass.noise_std = 0.05;
  c.agent.algorithm = algo;
  c.agent.ppo_epochs = 4;
  c.quantiles = 32;
  c.total_timesteps = 200'000;
  c.eval_interval = 20'000;
  c.eval_episodes = 10;
  c.seeds = {1, 2, 3, 4, 5};
  c.output_dir = dir.string();
  return c;
}

std::vector<double> final_returns(const dgae::TrainingReport& r) {
  std::vector<double> out;
  for (const auto& c : r.curves) out.push_back(c.points.back().mean_return);
  return out;
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double variance_of(const std::vector<double>& xs) {
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size());
}

Outcome learning_improvement(const fs::path& work) {
  const auto dppo_cfg = pointmass_config(dgae::Algorithm::dppo, work / "dppo");
  const auto ppo_cfg = pointmass_config(dgae::Algorithm::ppo, work / "ppo");
  const auto dppo = final_returns(dgae::run_training(dppo_cfg));
  const auto ppo = final_returns(dgae::run_training(ppo_cfg));

  const auto k = dgae::envs::lqr_gain(dppo_cfg.pointmass);
  const double f = dppo_cfg.pointmass.max_force;
  std::string detail;
  std::size_t passing = 0;
  for (std::size_t i = 0; i < dppo_cfg.seeds.size(); ++i) {
    const auto seed = dppo_cfg.seeds[i];
    const auto n = dppo_cfg.eval_episodes;
    auto rng = dgae::make_rng(seed, 5);
    std::uniform_real_distribution<double> u(-f, f);
    const double random = dgae::evaluate_returns(dppo_cfg, seed, n, [&](std::span<const double>) {
                            return std::vector<double>{u(rng)};
                          }).mean;
    const double lqr = dgae::evaluate_returns(dppo_cfg, seed, n, [&](std::span<const double> s) {
                         return std::vector<double>{std::clamp(-(k[0] * s[0] + k[1] * s[1]), -f, f)};
                       }).mean;
    const double threshold = random + 0.5 * (lqr - random);
    const bool ok = dppo[i] >= threshold;
    passing += ok;
    detail += "seed " + std::to_string(seed) + ": dppo " + fmt(dppo[i]) + " ppo " + fmt(ppo[i]) +
              " random " + fmt(random) + " lqr " + fmt(lqr) + " threshold " + fmt(threshold) +
              (ok ? " ok" : " miss") + "; ";
  }
  const double pooled = std::sqrt(0.5 * (variance_of(dppo) + variance_of(ppo)));
  const bool parity = mean_of(dppo) >= mean_of(ppo) - pooled;
  detail += "seeds above threshold " + std::to_string(passing) + "/5; dppo mean " + fmt(mean_of(dppo)) +
            " vs ppo mean " + fmt(mean_of(ppo)) + " - pooled std " + fmt(pooled) +
            (parity ? " (parity ok)" : " (parity miss)");
  return {passing >= 4 && parity, detail};
}

Outcome determinism(const fs::path& work) {
  std::string detail;
  bool ok = true;
  for (auto algo : {dgae::Algorithm::dppo, dgae::Algorithm::da2c}) {
    dgae::ExperimentConfig c;
    c.env = dgae::EnvKind::pointmass;
    c.agent.algorithm = algo;
    c.agent.rollout_length = 256;
    c.agent.ppo_epochs = 2;
    c.quantiles = 16;
    c.hidden = 32;
    c.total_timesteps = 2048;
    c.eval_interval = 512;
    c.eval_episodes = 3;
    c.seeds = {1, 2};
    const auto a = work / ("determinism_" + dgae::to_string(algo) + "_a");
    const auto b = work / ("determinism_" + dgae::to_string(algo) + "_b");
    c.output_dir = a.string();
    dgae::run_training(c, 1);
    c.output_dir = b.string();
    dgae::run_training(c, 2);
    std::vector<std::string> files{"aggregate.csv"};
    for (auto s : c.seeds) {
      files.push_back(fs::path(dgae::seed_curve_path("", s)).filename().string());
      files.push_back(fs::path(dgae::seed_diagnostics_path("", s)).filename().string());
    }
    for (const auto& f : files) {
      if (dgae::read_file((a / f).string()) != dgae::read_file((b / f).string())) {
        ok = false;
        detail += dgae::to_string(algo) + "/" + f + " differs; ";
      }
    }
  }
  return {ok, ok ? "curve, diagnostics and aggregate CSVs byte-identical across reruns (jobs 1 and 2)"
                 : detail};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "dgae_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  using dgae::verify::run_timed;
  std::vector<CheckResult> results;
  auto record = [&](CheckResult r) {
    dgae::verify::print_table(std::cout, {r});
    std::cout.flush();
    results.push_back(std::move(r));
  };
  record(run_timed("1 dgae_equivalence", 10.0, [] { return dgae::verify::check_theorem1(1000, 1e-10); }));
  record(run_timed("2 scalar_gae_reduction", 5.0, [] { return dgae::verify::check_scalar_reduction(1000, 1e-12); }));
  record(run_timed("3 metric_algebra", 5.0, [] { return dgae::verify::check_metric_algebra(10000, 1e-12); }));
  record(run_timed("4 gamma_contraction", 5.0, [] { return dgae::verify::check_contraction(1000, 1e-12); }));
  record(run_timed("5 gradient_checks", 30.0, gradient_checks));
  record(run_timed("6 chain_policy_evaluation", 180.0, [] { return dgae::verify::check_chain_policy_evaluation(); }));
  record(run_timed("7 learning_improvement", 900.0, [&] { return learning_improvement(work); }));
  record(run_timed("8 determinism", 600.0, [&] { return determinism(work); }));

  const bool ok = dgae::verify::all_passed(results);
  std::cout << (ok ? "ALL PASS" : "SOME CRITERIA FAILED") << "\n";
  return ok ? 0 : 1;
}
