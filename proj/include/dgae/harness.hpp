#pragma once

// Multi-seed orchestration and CSV reporting for training runs and
// gamma/lambda sweeps.
//
// Artifacts written by run_training into config.output_dir:
//   seed_<s>.csv              seed,timesteps,mean_return,std_return
//   diagnostics_seed_<s>.csv  iter,timesteps,policy_loss,value_loss,mean_advantage,mean_return_eval
//   checkpoint_seed_<s>.txt   see checkpoint.hpp
//   aggregate.csv             timesteps,mean_over_seeds,std_over_seeds
// A sweep additionally writes summary.csv (gamma,lambda,final_mean_return)
// with one training directory per grid cell.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dgae/agents.hpp"
#include "dgae/checkpoint.hpp"
#include "dgae/config.hpp"
#include "dgae/format.hpp"
#include "dgae/io.hpp"

namespace dgae {

inline std::string curve_csv(const LearningCurve& curve) {
  std::string out = "seed,timesteps,mean_return,std_return\n";
  for (const auto& p : curve.points) {
    out += std::to_string(curve.seed) + "," + std::to_string(p.timesteps) + "," +
           format_double(p.mean_return) + "," + format_double(p.std_return) + "\n";
  }
  return out;
}

inline std::string diagnostics_csv(const LearningCurve& curve) {
  std::string out = "iter,timesteps,policy_loss,value_loss,mean_advantage,mean_return_eval\n";
  for (const auto& d : curve.diagnostics) {
    out += std::to_string(d.iter) + "," + std::to_string(d.timesteps) + "," +
           format_double(d.policy_loss) + "," + format_double(d.value_loss) + "," +
           format_double(d.mean_advantage) + "," + format_double(d.mean_return_eval) + "\n";
  }
  return out;
}

/// Parses a per-seed curve CSV back into a LearningCurve (points only).
inline LearningCurve parse_curve_csv(const std::string& text) {
  LearningCurve curve;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "seed,timesteps,mean_return,std_return") {
    throw StateError("curve csv: unexpected header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cols.push_back(c);
    if (cols.size() != 4) throw StateError("curve csv: expected 4 columns");
    auto seed = parse_int<std::uint64_t>(cols[0]);
    auto ts = parse_int<std::size_t>(cols[1]);
    auto m = parse_double(cols[2]);
    auto s = parse_double(cols[3]);
    if (!seed || !ts || !m || !s) throw StateError("curve csv: bad row '" + line + "'");
    curve.seed = *seed;
    curve.points.push_back({*ts, *m, *s});
  }
  return curve;
}

struct AggregatePoint {
  std::size_t timesteps = 0;
  double mean_over_seeds = 0.0;
  double std_over_seeds = 0.0;  // population std across seeds
};

/// Pointwise mean and std across seeds. All curves must share the same
/// evaluation schedule.
inline std::vector<AggregatePoint> aggregate_curves(const std::vector<LearningCurve>& curves) {
  std::vector<AggregatePoint> out;
  if (curves.empty()) return out;
  const std::size_t rows = curves.front().points.size();
  for (const auto& c : curves) {
    if (c.points.size() != rows) throw DimensionError("aggregate: curves differ in length");
  }
  const double n = static_cast<double>(curves.size());
  for (std::size_t r = 0; r < rows; ++r) {
    AggregatePoint a;
    a.timesteps = curves.front().points[r].timesteps;
    for (const auto& c : curves) {
      if (c.points[r].timesteps != a.timesteps) {
        throw DimensionError("aggregate: curves differ in evaluation schedule");
      }
      a.mean_over_seeds += c.points[r].mean_return;
    }
    a.mean_over_seeds /= n;
    for (const auto& c : curves) {
      const double d = c.points[r].mean_return - a.mean_over_seeds;
      a.std_over_seeds += d * d;
    }
    a.std_over_seeds = std::sqrt(a.std_over_seeds / n);
    out.push_back(a);
  }
  return out;
}

inline std::string aggregate_csv(const std::vector<AggregatePoint>& agg) {
  std::string out = "timesteps,mean_over_seeds,std_over_seeds\n";
  for (const auto& a : agg) {
    out += std::to_string(a.timesteps) + "," + format_double(a.mean_over_seeds) + "," +
           format_double(a.std_over_seeds) + "\n";
  }
  return out;
}

inline std::string seed_curve_path(const std::string& dir, std::uint64_t seed) {
  return (std::filesystem::path(dir) / ("seed_" + std::to_string(seed) + ".csv")).string();
}
inline std::string seed_diagnostics_path(const std::string& dir, std::uint64_t seed) {
  return (std::filesystem::path(dir) / ("diagnostics_seed_" + std::to_string(seed) + ".csv"))
      .string();
}
inline std::string seed_checkpoint_path(const std::string& dir, std::uint64_t seed) {
  return (std::filesystem::path(dir) / ("checkpoint_seed_" + std::to_string(seed) + ".txt"))
      .string();
}
inline std::string aggregate_path(const std::string& dir) {
  return (std::filesystem::path(dir) / "aggregate.csv").string();
}

struct TrainingReport {
  std::vector<LearningCurve> curves;
  std::vector<AggregatePoint> aggregate;
};

/// Trains every seed (up to `jobs` at a time, each job isolated), writing
/// per-seed artifacts as training progresses and the aggregate once all
/// seeds have finished. A failing seed keeps its partial artifacts; the
/// first failure is rethrown after the other jobs complete.
inline TrainingReport run_training(const ExperimentConfig& config, std::size_t jobs = 1) {
  config.validate();
  const std::string& dir = config.output_dir;
  std::filesystem::create_directories(dir);
  const std::size_t n = config.seeds.size();
  std::vector<LearningCurve> curves(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= n) return;
      const std::uint64_t seed = config.seeds[i];
      try {
        std::size_t written_points = 0;
        auto observer = [&](const LearningCurve& c, const ActorCritic&) {
          write_file_atomic(seed_diagnostics_path(dir, seed), diagnostics_csv(c));
          if (c.points.size() != written_points) {
            write_file_atomic(seed_curve_path(dir, seed), curve_csv(c));
            written_points = c.points.size();
          }
        };
        auto result = train(config, seed, observer);
        write_file_atomic(seed_curve_path(dir, seed), curve_csv(result.curve));
        write_file_atomic(seed_diagnostics_path(dir, seed), diagnostics_csv(result.curve));
        save_checkpoint(seed_checkpoint_path(dir, seed), result.agent);
        curves[i] = std::move(result.curve);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  TrainingReport report{std::move(curves), {}};
  report.aggregate = aggregate_curves(report.curves);
  write_file_atomic(aggregate_path(dir), aggregate_csv(report.aggregate));
  return report;
}

struct SweepRow {
  double gamma = 0.0;
  double lambda = 0.0;
  double final_mean_return = 0.0;
};

inline std::string sweep_cell_dir(const std::string& dir, double gamma, double lambda) {
  return (std::filesystem::path(dir) /
          ("gamma_" + format_double(gamma) + "_lambda_" + format_double(lambda)))
      .string();
}

/// Runs run_training for every (gamma, lambda) cell and writes summary.csv.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& base,
                                       const std::vector<double>& gammas,
                                       const std::vector<double>& lambdas,
                                       std::size_t jobs = 1) {
  if (gammas.empty() || lambdas.empty()) {
    throw ConfigError("sweep.gammas", 0, "sweep needs at least one gamma and one lambda");
  }
  std::vector<SweepRow> rows;
  for (double g : gammas) {
    for (double l : lambdas) {
      ExperimentConfig cfg = base;
      cfg.agent.gae.gamma = g;
      cfg.agent.gae.lambda = l;
      cfg.output_dir = sweep_cell_dir(base.output_dir, g, l);
      const auto report = run_training(cfg, jobs);
      const double final_mean =
          report.aggregate.empty() ? std::nan("") : report.aggregate.back().mean_over_seeds;
      rows.push_back({g, l, final_mean});
    }
  }
  std::string csv = "gamma,lambda,final_mean_return\n";
  for (const auto& r : rows) {
    csv += format_double(r.gamma) + "," + format_double(r.lambda) + "," +
           format_double(r.final_mean_return) + "\n";
  }
  write_file_atomic((std::filesystem::path(base.output_dir) / "summary.csv").string(), csv);
  return rows;
}

}  // namespace dgae
