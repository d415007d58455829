#include <iostream>

#include <CLI11.hpp>

#include "ipinn/experiment.hpp"
#include "ipinn/plot.hpp"
#include "ipinn/verify.hpp"

namespace {

int cmd_run(const std::string& config_path) {
  const ipinn::ExperimentConfig cfg = ipinn::load_experiment(config_path);
  const ipinn::ExperimentResult res = ipinn::run_experiment(cfg);
  for (const auto& o : res.outcomes)
    std::cout << "seed " << o.seed << ": best eval_mse " << o.best.eval_mse << " at epoch "
              << o.best.epoch << (o.diverged ? " (diverged)" : "") << "\n";
  std::cout << "manifest: " << res.manifest_path << "\n";
  return 0;
}

int cmd_plot(const std::string& dir, bool log_y) {
  ipinn::PlotOptions options;
  options.log_y = log_y;
  for (const auto& path : ipinn::plot_run_dir(dir, options)) std::cout << path << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& config_path, std::uint64_t seed) {
  const ipinn::MlpParams params = ipinn::load_checkpoint(checkpoint);
  const ipinn::ExperimentConfig cfg = ipinn::load_experiment(config_path);
  double mse = 0.0;
  if (const auto* pg = std::get_if<ipinn::PoissonRobustGrid>(&cfg.eval)) {
    ipinn::Rng rng = ipinn::Rng::stream(seed, "eval");
    mse = ipinn::PoissonEvalGrid(std::get<ipinn::PoissonProblem>(cfg.problem), *pg, rng)
              .mse(params);
  } else if (const auto* mi = std::get_if<ipinn::MaxwellIid>(&cfg.eval)) {
    ipinn::Rng rng = ipinn::Rng::stream(seed, "eval");
    mse = ipinn::MaxwellEvalSet(std::get<ipinn::MaxwellProblem>(cfg.problem), *mi, rng)
              .mse(params);
  } else {
    const auto& sg = std::get<ipinn::SmolGrid>(cfg.eval);
    const auto grid =
        ipinn::smol_ground_truth(std::get<ipinn::SmolProblem>(cfg.problem), sg.nx, sg.nt);
    mse = ipinn::smol_eval(params, grid);
  }
  std::cout << "eval_mse " << mse << "\n";
  return 0;
}

int cmd_verify(const std::string& suite, const std::string& work_dir) {
  const ipinn::VerifyReport report = ipinn::run_verify_suite(suite, work_dir);
  ipinn::print_report(report, std::cout);
  return report.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Integral-residual PDE training experiments"};
  app.require_subcommand(1);

  std::string config_path, run_dir, checkpoint, suite, eval_config;
  std::string work_dir = "verify_out";
  std::uint64_t eval_seed = 0;
  bool log_y = false;

  auto* run = app.add_subcommand("run", "Train every seed of an experiment config");
  run->add_option("config", config_path, "experiment config file")->required();

  auto* plot = app.add_subcommand("plot", "Render metric SVGs for a run directory");
  plot->add_option("dir", run_dir, "run directory")->required();
  plot->add_flag("--log", log_y, "log-scale vertical axis");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint against ground truth");
  eval->add_option("checkpoint", checkpoint, "checkpoint json")->required();
  eval->add_option("--config", eval_config, "experiment config providing the problem")->required();
  eval->add_option("--seed", eval_seed, "evaluation randomness seed");

  auto* verify = app.add_subcommand("verify", "Run an acceptance suite");
  verify->add_option("suite", suite, "autodiff|oracles|bias|lintd|endtoend")->required();
  verify->add_option("--work-dir", work_dir, "scratch directory for suite artifacts");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path);
    if (plot->parsed()) return cmd_plot(run_dir, log_y);
    if (eval->parsed()) return cmd_eval(checkpoint, eval_config, eval_seed);
    return cmd_verify(suite, work_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
