#include "ipinn/trainers.hpp"

#include <chrono>
#include <cmath>

namespace ipinn {

EstimatorKind estimator_from_string(const std::string& s) {
  if (s == "standard") return EstimatorKind::Standard;
  if (s == "deterministic") return EstimatorKind::Deterministic;
  if (s == "double_sampling") return EstimatorKind::DoubleSampling;
  if (s == "delayed_target") return EstimatorKind::DelayedTarget;
  throw ConfigError("unknown estimator '" + s +
                    "' (expected standard|deterministic|double_sampling|delayed_target)");
}

std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::Standard: return "standard";
    case EstimatorKind::Deterministic: return "deterministic";
    case EstimatorKind::DoubleSampling: return "double_sampling";
    case EstimatorKind::DelayedTarget: return "delayed_target";
  }
  return "?";
}

void EstimatorConfig::validate() const {
  if (n_target < 1 || n_main < 1) throw ConfigError("estimator: N and N' must be >= 1");
  if (epochs < 0 || evals_per_epoch < 1) throw ConfigError("estimator: bad epoch budget");
  if (scale_m < 1) throw ConfigError("estimator: M must be >= 1");
  if (kind == EstimatorKind::Deterministic && !sampler_is_deterministic(sampler))
    throw ConfigError("deterministic estimator requires a deterministic sampler (lattice or "
                      "gauss_legendre)");
  if (kind == EstimatorKind::DelayedTarget && (tau < 0.0 || tau > 1.0))
    throw ConfigError("estimator: tau must be in [0,1]");
  if (kind == EstimatorKind::DelayedTarget && lambda < 0.0)
    throw ConfigError("estimator: lambda must be >= 0");
}

// --- TermBatch ---------------------------------------------------------------

int TermBatch::add(const Term& term) {
  if (evaluated_) throw UsageError("TermBatch: cannot add terms after evaluation");
  TermRef ref;
  ref.term = &term;
  if (const auto* lin = std::get_if<LinearTerm>(&term.body)) {
    for (const EvalPoint& p : lin->points) {
      if (p.dir.size() > 0) {
        ref.prims.push_back({true, n_tangent_++});
        tangent_x_.push_back(p.x);
        tangent_v_.push_back(p.dir);
      } else {
        ref.prims.push_back({false, n_value_++});
        value_x_.push_back(p.x);
      }
    }
  } else {
    const auto& prod = std::get<ProductTerm>(term.body);
    ref.prims.push_back({false, n_value_++});
    value_x_.push_back(prod.a.x);
    ref.prims.push_back({false, n_value_++});
    value_x_.push_back(prod.b.x);
  }
  terms_.push_back(std::move(ref));
  values_.push_back(0.0);
  seeds_.push_back(0.0);
  return static_cast<int>(terms_.size()) - 1;
}

void TermBatch::evaluate(const MlpParams& params) {
  const int in = params.config.input_dim;
  if (n_tangent_ > 0) {
    Mat x(in, n_tangent_), v(in, n_tangent_);
    for (int i = 0; i < n_tangent_; ++i) {
      x.col(i) = tangent_x_[i];
      v.col(i) = tangent_v_[i];
    }
    forward_tangent_batch(params, x, v, yt_, tt_, &cache_t_);
  }
  if (n_value_ > 0) {
    Mat x(in, n_value_);
    for (int i = 0; i < n_value_; ++i) x.col(i) = value_x_[i];
    yv_ = forward_batch(params, x, &cache_v_);
  }
  for (size_t i = 0; i < terms_.size(); ++i) {
    const TermRef& ref = terms_[i];
    double v = 0.0;
    if (const auto* lin = std::get_if<LinearTerm>(&ref.term->body)) {
      for (size_t p = 0; p < ref.prims.size(); ++p) {
        const PrimRef& pr = ref.prims[p];
        if (pr.tangent_path)
          v += lin->w_value[p].dot(yt_.col(pr.col)) + lin->w_tangent[p].dot(tt_.col(pr.col));
        else
          v += lin->w_value[p].dot(yv_.col(pr.col));
      }
    } else {
      const auto& prod = std::get<ProductTerm>(ref.term->body);
      v = prod.scale * yv_(0, ref.prims[0].col) * yv_(0, ref.prims[1].col);
    }
    values_[i] = v;
  }
  evaluated_ = true;
}

void TermBatch::backward(const MlpParams& params, GradVector& grad) {
  if (!evaluated_) throw UsageError("TermBatch: backward before evaluate");
  const int out = params.config.output_dim;
  Mat dyt, dtt, dyv;
  if (n_tangent_ > 0) {
    dyt = Mat::Zero(out, n_tangent_);
    dtt = Mat::Zero(out, n_tangent_);
  }
  if (n_value_ > 0) dyv = Mat::Zero(out, n_value_);
  for (size_t i = 0; i < terms_.size(); ++i) {
    const double s = seeds_[i];
    if (s == 0.0) continue;
    const TermRef& ref = terms_[i];
    if (const auto* lin = std::get_if<LinearTerm>(&ref.term->body)) {
      for (size_t p = 0; p < ref.prims.size(); ++p) {
        const PrimRef& pr = ref.prims[p];
        if (pr.tangent_path) {
          dyt.col(pr.col) += s * lin->w_value[p];
          dtt.col(pr.col) += s * lin->w_tangent[p];
        } else {
          dyv.col(pr.col) += s * lin->w_value[p];
        }
      }
    } else {
      const auto& prod = std::get<ProductTerm>(ref.term->body);
      const double va = yv_(0, ref.prims[0].col), vb = yv_(0, ref.prims[1].col);
      dyv(0, ref.prims[0].col) += s * prod.scale * vb;
      dyv(0, ref.prims[1].col) += s * prod.scale * va;
    }
  }
  if (n_tangent_ > 0) backward_batch(params, cache_t_, dyt, &dtt, grad);
  if (n_value_ > 0) backward_batch(params, cache_v_, dyv, nullptr, grad);
}

namespace {

double coeff_sum(const TermBatch& batch, const std::vector<Term>& terms, int first) {
  double s = 0.0;
  for (size_t i = 0; i < terms.size(); ++i) s += terms[i].coeff * batch.value(first + static_cast<int>(i));
  return s;
}

double residual_value(const ResidualSample& rs, const TermBatch& main_batch, int main_first,
                      const TermBatch& target_batch, int target_first) {
  return rs.main_weight * coeff_sum(main_batch, rs.main_terms, main_first) -
         rs.target_weight * coeff_sum(target_batch, rs.target_terms, target_first) - rs.label;
}

void seed_side(TermBatch& batch, const std::vector<Term>& terms, int first, double factor) {
  for (size_t i = 0; i < terms.size(); ++i)
    batch.seed(first + static_cast<int>(i), factor * terms[i].coeff);
}

}  // namespace

double loss_standard(const ResidualSample& rs, TermBatch& batch, int main_first, int target_first,
                     double weight) {
  const double r = residual_value(rs, batch, main_first, batch, target_first);
  seed_side(batch, rs.main_terms, main_first, weight * 2.0 * r * rs.main_weight);
  seed_side(batch, rs.target_terms, target_first, -weight * 2.0 * r * rs.target_weight);
  return r * r;
}

double loss_double_sampling(const ResidualSample& rs1, const ResidualSample& rs2, TermBatch& batch,
                            int main_first, int t1_first, int t2_first, double weight) {
  const double r1 = residual_value(rs1, batch, main_first, batch, t1_first);
  const double r2 = rs1.main_weight * coeff_sum(batch, rs1.main_terms, main_first) -
                    rs2.target_weight * coeff_sum(batch, rs2.target_terms, t2_first) - rs2.label;
  seed_side(batch, rs1.main_terms, main_first, weight * (r1 + r2) * rs1.main_weight);
  seed_side(batch, rs1.target_terms, t1_first, -weight * r2 * rs1.target_weight);
  seed_side(batch, rs2.target_terms, t2_first, -weight * r1 * rs2.target_weight);
  return r1 * r2;
}

double loss_delayed_target(const ResidualSample& rs, double lambda, TermBatch& main_batch,
                           TermBatch& target_batch, int main_first, int target_first,
                           int reg_first, double weight) {
  const double r = residual_value(rs, main_batch, main_first, target_batch, target_first);
  const double f_main = rs.main_weight * coeff_sum(main_batch, rs.main_terms, main_first);
  const double f_target = rs.main_weight * coeff_sum(target_batch, rs.main_terms, reg_first);
  const double gap = f_main - f_target;
  // Gradient flows only through the main-side evaluations; the target batch
  // receives no seeds (detached).
  seed_side(main_batch, rs.main_terms, main_first,
            weight * 2.0 * (r + lambda * gap) * rs.main_weight);
  return r * r + lambda * gap * gap;
}

// --- Problem adapters ----------------------------------------------------------

namespace {

class PoissonAdapter final : public ProblemAdapter {
 public:
  explicit PoissonAdapter(PoissonProblem p) : problem_(std::move(p)) {}
  int input_dim() const override { return problem_.dim; }
  int output_dim() const override { return 1; }
  Volume sample_volume(Rng& rng) const override {
    return sample_training_ball(problem_.dim, problem_.ball_profile, rng);
  }
  ResidualSample residual(const Volume& vol, SamplerKind kind, int n_main, int n_target,
                          int scale_m, Rng& rng) const override {
    return poisson_residual(problem_, std::get<Ball>(vol), kind, n_main, n_target, rng, scale_m);
  }
  const PoissonProblem problem_;
};

class MaxwellAdapter final : public ProblemAdapter {
 public:
  explicit MaxwellAdapter(MaxwellProblem p) : problem_(std::move(p)) { problem_.validate(); }
  int input_dim() const override { return 3; }
  int output_dim() const override { return 3; }
  Volume sample_volume(Rng& rng) const override { return sample_training_disk(rng); }
  ResidualSample residual(const Volume& vol, SamplerKind kind, int n_main, int n_target,
                          int scale_m, Rng& rng) const override {
    return maxwell_residual(problem_, std::get<Disk>(vol), kind, n_main, n_target, rng, scale_m);
  }
  MaxwellProblem problem_;
};

class SmolAdapter final : public ProblemAdapter {
 public:
  explicit SmolAdapter(SmolProblem p) : problem_(std::move(p)) {}
  int input_dim() const override { return 2; }
  int output_dim() const override { return 1; }
  Volume sample_volume(Rng& rng) const override {
    return SizeTimePoint{rng.uniform01(), rng.uniform01()};
  }
  ResidualSample residual(const Volume& vol, SamplerKind, int, int n_target, int,
                          Rng& rng) const override {
    const auto& st = std::get<SizeTimePoint>(vol);
    return smol_residual(problem_, st.x, st.t, n_target, rng);
  }
  double extra_loss(const MlpParams& params, Rng& rng, GradVector* grad) const override {
    return initial_condition_loss(params, problem_, problem_.ic_points, rng, grad);
  }
  const SmolProblem problem_;
};

int count_points(const ResidualSample& rs) {
  int n = 0;
  auto count_terms = [&n](const std::vector<Term>& terms) {
    for (const Term& t : terms) {
      if (const auto* lin = std::get_if<LinearTerm>(&t.body))
        n += static_cast<int>(lin->points.size());
      else
        n += 2;
    }
  };
  count_terms(rs.main_terms);
  count_terms(rs.target_terms);
  return n;
}

}  // namespace

std::unique_ptr<ProblemAdapter> make_poisson_adapter(PoissonProblem problem) {
  return std::make_unique<PoissonAdapter>(std::move(problem));
}
std::unique_ptr<ProblemAdapter> make_maxwell_adapter(MaxwellProblem problem) {
  return std::make_unique<MaxwellAdapter>(std::move(problem));
}
std::unique_ptr<ProblemAdapter> make_smol_adapter(SmolProblem problem) {
  return std::make_unique<SmolAdapter>(std::move(problem));
}

int evals_per_residual(const ProblemAdapter& adapter, const EstimatorConfig& cfg) {
  Rng rng = Rng::stream(0, "budget-probe");
  const Volume vol = adapter.sample_volume(rng);
  const ResidualSample rs =
      adapter.residual(vol, cfg.sampler, cfg.n_main, cfg.n_target, cfg.scale_m, rng);
  int n = count_points(rs);
  if (cfg.kind == EstimatorKind::DoubleSampling) {
    // second independent target draw
    ResidualSample probe = rs;
    probe.main_terms.clear();
    n += count_points(probe);
  }
  return n;
}

int balls_per_epoch(const ProblemAdapter& adapter, const EstimatorConfig& cfg) {
  return std::max(1, cfg.evals_per_epoch / evals_per_residual(adapter, cfg));
}

double excess_variance_estimate(const MlpParams& params, const ProblemAdapter& adapter,
                                const EstimatorConfig& cfg, int n_balls, int n_draws, Rng& rng) {
  if (n_draws < 2) throw ConfigError("excess_variance_estimate: n_draws must be >= 2");
  double total = 0.0;
  for (int b = 0; b < n_balls; ++b) {
    const Volume vol = adapter.sample_volume(rng);
    const ResidualSample rs =
        adapter.residual(vol, cfg.sampler, cfg.n_main, n_draws, cfg.scale_m, rng);
    TermBatch batch;
    const int first = batch.size();
    for (const Term& t : rs.target_terms) batch.add(t);
    batch.evaluate(params);
    // Per variance group: sample variance of the single-draw full-scale
    // estimates u_j = coeff_j * n_draws * value_j.
    double var_sum = 0.0;
    for (int g = 0;; ++g) {
      double sum = 0.0, sum2 = 0.0;
      int count = 0;
      for (size_t j = 0; j < rs.target_terms.size(); ++j) {
        if (rs.target_terms[j].group != g) continue;
        const double u = rs.target_terms[j].coeff * n_draws * batch.value(first + static_cast<int>(j));
        sum += u;
        sum2 += u * u;
        ++count;
      }
      if (count == 0) break;
      if (count >= 2) var_sum += (sum2 - sum * sum / count) / (count - 1);
    }
    total += rs.target_weight * rs.target_weight * var_sum / cfg.n_target;
  }
  return n_balls > 0 ? total / n_balls : 0.0;
}

TrainResult train(const ProblemAdapter& adapter, const MlpConfig& net_config,
                  const EstimatorConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  if (net_config.input_dim != adapter.input_dim() || net_config.output_dim != adapter.output_dim())
    throw ConfigError("train: network topology does not match the problem");

  Rng init_rng = Rng::stream(options.seed, "init");
  Rng vol_rng = Rng::stream(options.seed, "balls");
  Rng pt_rng = Rng::stream(options.seed, "surface");
  Rng diag_rng = Rng::stream(options.seed, "diag");
  Rng ic_rng = Rng::stream(options.seed, "ic");

  MlpParams params = init_mlp(net_config, init_rng);
  TargetPair pair = TargetPair::make(params, cfg.tau);
  AdamState adam = AdamState::for_params(params, cfg.lr);

  const bool delayed = cfg.kind == EstimatorKind::DelayedTarget;
  const int n_balls = balls_per_epoch(adapter, cfg);

  TrainResult result{.records = {}, .diverged = false, .final_params = params};
  result.evals_per_epoch_used = n_balls * evals_per_residual(adapter, cfg);

  double last_eval = options.evaluator ? options.evaluator(params) : 0.0;
  result.records.push_back({0, 0.0, 0.0, last_eval, false, 0});

  const auto t0 = std::chrono::steady_clock::now();
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    TermBatch main_batch, target_batch;
    struct Slot {
      ResidualSample rs, rs2;
      int main_first, target_first, t2_first, reg_first;
    };
    std::vector<Slot> slots;
    slots.reserve(n_balls);
    for (int b = 0; b < n_balls; ++b) {
      Volume vol = adapter.sample_volume(vol_rng);
      if (epoch == 1 && b < 10) result.first_volumes.push_back(vol);
      Slot slot;
      slot.rs = adapter.residual(vol, cfg.sampler, cfg.n_main, cfg.n_target, cfg.scale_m, pt_rng);
      slot.main_first = main_batch.size();
      if (delayed) {
        for (const Term& t : slot.rs.main_terms) main_batch.add(t);
        slot.target_first = target_batch.size();
        for (const Term& t : slot.rs.target_terms) target_batch.add(t);
        slot.reg_first = target_batch.size();
        for (const Term& t : slot.rs.main_terms) target_batch.add(t);
      } else {
        for (const Term& t : slot.rs.main_terms) main_batch.add(t);
        slot.target_first = main_batch.size();
        for (const Term& t : slot.rs.target_terms) main_batch.add(t);
        if (cfg.kind == EstimatorKind::DoubleSampling) {
          slot.rs2 = adapter.residual(vol, cfg.sampler, cfg.n_main, cfg.n_target, cfg.scale_m,
                                      pt_rng);
          slot.t2_first = main_batch.size();
          for (const Term& t : slot.rs2.target_terms) main_batch.add(t);
        }
      }
      slots.push_back(std::move(slot));
    }

    main_batch.evaluate(params);
    if (delayed) target_batch.evaluate(pair.target);

    const double w = 1.0 / n_balls;
    double loss = 0.0;
    for (const Slot& s : slots) {
      switch (cfg.kind) {
        case EstimatorKind::Standard:
        case EstimatorKind::Deterministic:
          loss += w * loss_standard(s.rs, main_batch, s.main_first, s.target_first, w);
          break;
        case EstimatorKind::DoubleSampling:
          loss += w * loss_double_sampling(s.rs, s.rs2, main_batch, s.main_first, s.target_first,
                                           s.t2_first, w);
          break;
        case EstimatorKind::DelayedTarget:
          loss += w * loss_delayed_target(s.rs, cfg.lambda, main_batch, target_batch, s.main_first,
                                          s.target_first, s.reg_first, w);
          break;
      }
    }

    GradVector grad = GradVector::Zero(params.flat.size());
    loss += adapter.extra_loss(params, ic_rng, &grad);
    main_batch.backward(params, grad);

    double excess = 0.0;
    if (cfg.kind != EstimatorKind::Deterministic && cfg.diag_balls > 0)
      excess = excess_variance_estimate(params, adapter, cfg, cfg.diag_balls, cfg.diag_draws,
                                        diag_rng);

    // Main-target drift probe at a few diagnostic points (delayed target).
    double drift = 0.0;
    if (delayed) {
      Mat probe(net_config.input_dim, cfg.diag_balls);
      Rng probe_rng = Rng::stream(options.seed ^ 0x9e37UL, "drift");
      for (int i = 0; i < cfg.diag_balls; ++i)
        for (int j = 0; j < net_config.input_dim; ++j) probe(j, i) = probe_rng.uniform(-1.0, 1.0);
      drift = (forward_batch(params, probe) - forward_batch(pair.target, probe))
                  .cwiseAbs()
                  .maxCoeff();
    }

    const bool bad = !std::isfinite(loss) || loss > options.divergence_loss ||
                     drift > options.divergence_drift;
    std::int64_t wall = 0;
    if (options.record_walltime)
      wall = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                   t0)
                 .count();
    if (bad) {
      result.diverged = true;
      result.records.push_back({epoch, loss, excess, last_eval, true, wall});
      break;
    }

    adam_step(adam, params, grad);
    if (delayed) {
      pair.main = params;
      polyak_update(pair);
    }

    if (options.evaluator && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs))
      last_eval = options.evaluator(params);
    result.records.push_back({epoch, loss, excess, last_eval, false, wall});
  }

  result.final_params = params;
  return result;
}

}  // namespace ipinn
