#pragma once

#include <string>
#include <variant>
#include <vector>

#include "ipinn/config.hpp"
#include "ipinn/eval.hpp"
#include "ipinn/problems.hpp"
#include "ipinn/trainers.hpp"

namespace ipinn {

using ProblemSpec = std::variant<PoissonProblem, MaxwellProblem, SmolProblem>;

struct ExperimentConfig {
  ProblemSpec problem;
  MlpConfig network;
  EstimatorConfig estimator;
  EvalProfile eval;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "out";
  bool record_walltime = false;  // off by default so reruns are byte-identical
  std::string config_hash;
};

// Parses and validates; throws ConfigError with file:line diagnostics,
// including for unknown keys.
ExperimentConfig load_experiment(const std::string& path);
ExperimentConfig parse_experiment(Config& cfg);

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::string metrics_path;
  std::string checkpoint_path;
  bool diverged = false;
  MetricRecord best;
  std::vector<Volume> first_volumes;
};

struct ExperimentResult {
  std::vector<SeedOutcome> outcomes;
  std::string manifest_path;
};

// Trains every seed (worker count from IPINN_WORKERS, default 1), writes one
// metrics CSV and one checkpoint per seed plus a JSON manifest. A diverged
// run still completes and is flagged in its records and the manifest.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Fixed column order: epoch,train_loss,excess_variance,eval_mse,diverged,wall_ms
void write_metrics_csv(const std::string& path, const std::vector<MetricRecord>& records);
std::vector<MetricRecord> read_metrics_csv(const std::string& path);

}  // namespace ipinn
