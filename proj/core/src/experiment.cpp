#include "ipinn/experiment.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace ipinn {

namespace {

ProblemSpec parse_problem(Config& cfg, MlpConfig& net) {
  const std::string kind = cfg.require_string("problem", "kind");
  if (kind == "poisson") {
    const int dim = static_cast<int>(cfg.get_int("problem", "dim", 2));
    const std::string profile = cfg.get_string("problem", "profile", dim == 2 ? "planar" : "high_dim");
    PoissonProblem p;
    if (profile == "planar") {
      if (dim != 2) throw ConfigError("problem: the planar charge layout is two-dimensional");
      p = PoissonProblem::planar_three_charges();
    } else if (profile == "high_dim") {
      p = PoissonProblem::high_dim(dim);
    } else {
      throw ConfigError("problem: unknown profile '" + profile + "'");
    }
    net.input_dim = dim;
    net.output_dim = 1;
    return p;
  }
  if (kind == "maxwell") {
    MaxwellProblem p = MaxwellProblem::rectangular_circuit();
    p.current = cfg.get_double("problem", "current", p.current);
    net.input_dim = 3;
    net.output_dim = 3;
    return p;
  }
  if (kind == "smol") {
    SmolProblem p;
    p.kernel_c = cfg.get_double("problem", "kernel_c", p.kernel_c);
    p.kernel_cap = cfg.get_double("problem", "kernel_cap", p.kernel_cap);
    p.ic_weight = cfg.get_double("problem", "ic_weight", p.ic_weight);
    p.conventional_half_gain =
        cfg.get_bool("problem", "half_gain", p.conventional_half_gain);
    net.input_dim = 2;
    net.output_dim = 1;
    return p;
  }
  throw ConfigError("problem: unknown kind '" + kind + "' (poisson|maxwell|smol)");
}

EvalProfile parse_eval(Config& cfg, const ProblemSpec& problem) {
  std::string fallback = std::holds_alternative<PoissonProblem>(problem) ? "poisson_grid"
                         : std::holds_alternative<MaxwellProblem>(problem) ? "maxwell_iid"
                                                                           : "smol_grid";
  const std::string kind = cfg.get_string("eval", "kind", fallback);
  if (kind == "poisson_grid") {
    PoissonRobustGrid p;
    p.q = static_cast<int>(cfg.get_int("eval", "q", p.q));
    p.s = static_cast<int>(cfg.get_int("eval", "s", p.s));
    p.t = static_cast<int>(cfg.get_int("eval", "t", p.t));
    if (p.q < 1 || p.s < 1 || p.t < 1) throw ConfigError("eval: q, s, t must be >= 1");
    return p;
  }
  if (kind == "maxwell_iid") {
    MaxwellIid p;
    p.n = static_cast<int>(cfg.get_int("eval", "n", p.n));
    if (p.n < 2) throw ConfigError("eval: n must be >= 2");
    return p;
  }
  if (kind == "smol_grid") {
    SmolGrid p;
    p.nx = static_cast<int>(cfg.get_int("eval", "grid_nx", p.nx));
    p.nt = static_cast<int>(cfg.get_int("eval", "grid_nt", p.nt));
    if (p.nx < 2 || p.nt < 2) throw ConfigError("eval: grid_nx, grid_nt must be >= 2");
    return p;
  }
  throw ConfigError("eval: unknown kind '" + kind + "'");
}

nlohmann::json volume_json(const Volume& vol) {
  nlohmann::json j;
  if (const Ball* b = std::get_if<Ball>(&vol)) {
    j["type"] = "ball";
    j["center"] = std::vector<double>(b->center.data(), b->center.data() + b->center.size());
    j["radius"] = b->radius;
  } else if (const Disk* d = std::get_if<Disk>(&vol)) {
    j["type"] = "disk";
    j["center"] = {d->center.x(), d->center.y(), d->center.z()};
    j["normal"] = {d->normal.x(), d->normal.y(), d->normal.z()};
    j["radius"] = d->radius;
  } else {
    const SizeTimePoint& p = std::get<SizeTimePoint>(vol);
    j["type"] = "size_time";
    j["x"] = p.x;
    j["t"] = p.t;
  }
  return j;
}

int worker_count() {
  const char* env = std::getenv("IPINN_WORKERS");
  if (!env || !*env) return 1;
  const int n = std::atoi(env);
  if (n < 1 || n > 256) throw ConfigError("IPINN_WORKERS must be between 1 and 256");
  return n;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ExperimentConfig parse_experiment(Config& cfg) {
  ExperimentConfig out;
  out.problem = parse_problem(cfg, out.network);

  out.network.hidden_width =
      static_cast<int>(cfg.get_int("network", "hidden_width", out.network.hidden_width));
  out.network.hidden_layers =
      static_cast<int>(cfg.get_int("network", "hidden_layers", out.network.hidden_layers));
  out.network.activation = activation_from_string(
      cfg.get_string("network", "activation", to_string(out.network.activation)));
  out.network.validate();

  EstimatorConfig& est = out.estimator;
  est.kind = estimator_from_string(cfg.get_string("estimator", "kind", to_string(est.kind)));
  if (std::holds_alternative<MaxwellProblem>(out.problem)) {  // problem-tuned defaults
    est.tau = 0.75;
    est.lambda = 64.0;
    est.scale_m = 1000;
  } else if (std::holds_alternative<SmolProblem>(out.problem)) {
    est.tau = 0.99;
    est.lambda = 1.0;
  }
  est.n_target = static_cast<int>(cfg.get_int("estimator", "n_target", est.n_target));
  est.n_main = static_cast<int>(cfg.get_int("estimator", "n_main", est.n_main));
  est.tau = cfg.get_double("estimator", "tau", est.tau);
  est.lambda = cfg.get_double("estimator", "lambda", est.lambda);
  est.scale_m = static_cast<int>(cfg.get_int("estimator", "scale_m", est.scale_m));
  est.epochs = static_cast<int>(cfg.get_int("estimator", "epochs", est.epochs));
  est.evals_per_epoch =
      static_cast<int>(cfg.get_int("estimator", "evals_per_epoch", est.evals_per_epoch));
  est.sampler = sampler_from_string(cfg.get_string("estimator", "sampler", "iid_gaussian"));
  est.lr = cfg.get_double("estimator", "lr", est.lr);
  est.eval_every = static_cast<int>(cfg.get_int("estimator", "eval_every", est.eval_every));
  est.diag_balls = static_cast<int>(cfg.get_int("estimator", "diag_balls", est.diag_balls));
  est.diag_draws = static_cast<int>(cfg.get_int("estimator", "diag_draws", est.diag_draws));
  est.ic_points = static_cast<int>(cfg.get_int("estimator", "ic_points", est.ic_points));
  est.validate();
  if (auto* smol = std::get_if<SmolProblem>(&out.problem)) smol->ic_points = est.ic_points;

  out.eval = parse_eval(cfg, out.problem);

  const auto seeds = cfg.get_ints("run", "seeds", {0});
  for (const long long s : seeds) {
    if (s < 0) throw ConfigError("run: seeds must be non-negative");
    out.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  for (size_t i = 0; i < out.seeds.size(); ++i)
    for (size_t j = i + 1; j < out.seeds.size(); ++j)
      if (out.seeds[i] == out.seeds[j]) throw ConfigError("run: seeds must be distinct");
  if (out.seeds.empty()) throw ConfigError("run: need at least one seed");
  out.output_dir = cfg.get_string("run", "output_dir", out.output_dir);
  out.record_walltime = cfg.get_bool("run", "record_walltime", out.record_walltime);

  cfg.finish();
  out.config_hash = cfg.hash();
  return out;
}

ExperimentConfig load_experiment(const std::string& path) {
  Config cfg = Config::parse_file(path);
  return parse_experiment(cfg);
}

void write_metrics_csv(const std::string& path, const std::vector<MetricRecord>& records) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write metrics file: " + path);
  out << "epoch,train_loss,excess_variance,eval_mse,diverged,wall_ms\n";
  for (const auto& r : records)
    out << r.epoch << ',' << format_double(r.train_loss) << ','
        << format_double(r.excess_variance) << ',' << format_double(r.eval_mse) << ','
        << (r.diverged ? 1 : 0) << ',' << r.wall_ms << '\n';
}

std::vector<MetricRecord> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open metrics file: " + path);
  std::string line;
  if (!std::getline(in, line) ||
      line != "epoch,train_loss,excess_variance,eval_mse,diverged,wall_ms")
    throw UsageError(path + ": unexpected metrics header");
  std::vector<MetricRecord> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() != 6)
      throw UsageError(path + ":" + std::to_string(line_no) + ": expected 6 fields");
    MetricRecord r;
    r.epoch = std::stoi(fields[0]);
    r.train_loss = std::stod(fields[1]);
    r.excess_variance = std::stod(fields[2]);
    r.eval_mse = std::stod(fields[3]);
    r.diverged = fields[4] == "1";
    r.wall_ms = std::stoll(fields[5]);
    out.push_back(r);
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);

  // Ground-truth grid for the coagulation problem is deterministic; build it
  // once and share it across seeds.
  std::shared_ptr<const GroundTruthGrid> smol_grid;
  if (const SmolGrid* sg = std::get_if<SmolGrid>(&cfg.eval)) {
    const SmolProblem& sp = std::get<SmolProblem>(cfg.problem);
    auto grid = std::make_shared<GroundTruthGrid>(smol_ground_truth(sp, sg->nx, sg->nt));
    grid->save((fs::path(cfg.output_dir) / "ground_truth.bin").string());
    smol_grid = grid;
  }

  const int n_seeds = static_cast<int>(cfg.seeds.size());
  std::vector<SeedOutcome> outcomes(n_seeds);

  auto run_one = [&](int idx) {
    const std::uint64_t seed = cfg.seeds[idx];
    std::unique_ptr<ProblemAdapter> adapter = std::visit(
        [](const auto& p) { return make_adapter(p); }, cfg.problem);

    TrainOptions opts;
    opts.seed = seed;
    opts.record_walltime = cfg.record_walltime;

    std::shared_ptr<PoissonEvalGrid> pgrid;
    std::shared_ptr<MaxwellEvalSet> mset;
    if (const PoissonRobustGrid* pg = std::get_if<PoissonRobustGrid>(&cfg.eval)) {
      Rng eval_rng = Rng::stream(seed, "eval");
      pgrid = std::make_shared<PoissonEvalGrid>(std::get<PoissonProblem>(cfg.problem), *pg,
                                                eval_rng);
      opts.evaluator = [pgrid](const MlpParams& p) { return pgrid->mse(p); };
    } else if (const MaxwellIid* mi = std::get_if<MaxwellIid>(&cfg.eval)) {
      Rng eval_rng = Rng::stream(seed, "eval");
      mset = std::make_shared<MaxwellEvalSet>(std::get<MaxwellProblem>(cfg.problem), *mi,
                                              eval_rng);
      opts.evaluator = [mset](const MlpParams& p) { return mset->mse(p); };
    } else {
      auto grid = smol_grid;
      opts.evaluator = [grid](const MlpParams& p) { return smol_eval(p, *grid); };
    }

    const TrainResult res = train(*adapter, cfg.network, cfg.estimator, opts);

    SeedOutcome& out = outcomes[idx];
    out.seed = seed;
    out.diverged = res.diverged;
    out.first_volumes = res.first_volumes;
    out.metrics_path =
        (fs::path(cfg.output_dir) / ("metrics_seed" + std::to_string(seed) + ".csv")).string();
    out.checkpoint_path =
        (fs::path(cfg.output_dir) / ("checkpoint_seed" + std::to_string(seed) + ".json")).string();
    write_metrics_csv(out.metrics_path, res.records);
    save_checkpoint(res.final_params, out.checkpoint_path);
    out.best = best_epoch(res.records);
  };

  const int workers = std::min(worker_count(), n_seeds);
  if (workers <= 1) {
    for (int i = 0; i < n_seeds; ++i) run_one(i);
  } else {
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int i = next.fetch_add(1); i < n_seeds; i = next.fetch_add(1)) {
          try {
            run_one(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }

  nlohmann::json manifest;
  manifest["config_hash"] = cfg.config_hash;
  manifest["version"] = "0.1.0";
  manifest["completed"] = true;
  manifest["runs"] = nlohmann::json::array();
  for (const auto& out : outcomes) {
    nlohmann::json run;
    run["seed"] = out.seed;
    run["metrics"] = out.metrics_path;
    run["checkpoint"] = out.checkpoint_path;
    run["diverged"] = out.diverged;
    run["best_epoch"] = out.best.epoch;
    run["best_eval_mse"] = out.best.eval_mse;
    run["first_volumes"] = nlohmann::json::array();
    for (const auto& vol : out.first_volumes) run["first_volumes"].push_back(volume_json(vol));
    manifest["runs"].push_back(run);
  }
  ExperimentResult result;
  result.outcomes = std::move(outcomes);
  result.manifest_path = (fs::path(cfg.output_dir) / "manifest.json").string();
  std::ofstream mout(result.manifest_path);
  mout << manifest.dump(2) << '\n';
  return result;
}

}  // namespace ipinn
