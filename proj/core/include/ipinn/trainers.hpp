#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ipinn/problems.hpp"

namespace ipinn {

enum class EstimatorKind { Standard, Deterministic, DoubleSampling, DelayedTarget };

EstimatorKind estimator_from_string(const std::string& s);
std::string to_string(EstimatorKind k);

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::Standard;
  int n_target = 1;      // N
  int n_main = 1;        // N'
  double tau = 0.996;    // Polyak rate (delayed target)
  double lambda = 4.0;   // target regularization weight (delayed target)
  int scale_m = 500;     // nominal Riemann-sum size M
  int epochs = 1000;
  int evals_per_epoch = 1000;  // shared compute budget per epoch
  SamplerKind sampler = SamplerKind::IidGaussianNormalized;
  double lr = 1e-3;
  int eval_every = 100;        // epochs between ground-truth evaluations
  int diag_balls = 8;          // volumes per excess-variance diagnostic
  int diag_draws = 16;         // draws per volume in the diagnostic
  int ic_points = 100;         // initial-condition points per epoch (coagulation)

  void validate() const;
};

struct MetricRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double excess_variance = 0.0;
  double eval_mse = 0.0;
  bool diverged = false;
  std::int64_t wall_ms = 0;
};

// A training volume for any of the three problems.
struct SizeTimePoint {
  double x = 0.0;
  double t = 0.0;
};
using Volume = std::variant<Ball, Disk, SizeTimePoint>;

// Problem-specific assembly behind one interface so the estimators never
// special-case problems.
class ProblemAdapter {
 public:
  virtual ~ProblemAdapter() = default;
  virtual int input_dim() const = 0;
  virtual int output_dim() const = 0;
  virtual Volume sample_volume(Rng& rng) const = 0;
  virtual ResidualSample residual(const Volume& vol, SamplerKind kind, int n_main, int n_target,
                                  int scale_m, Rng& rng) const = 0;
  // Additional per-epoch loss (initial-condition penalty); returns its value
  // and accumulates the gradient when grad is non-null.
  virtual double extra_loss(const MlpParams&, Rng&, GradVector*) const { return 0.0; }
};

std::unique_ptr<ProblemAdapter> make_poisson_adapter(PoissonProblem problem);
std::unique_ptr<ProblemAdapter> make_maxwell_adapter(MaxwellProblem problem);
std::unique_ptr<ProblemAdapter> make_smol_adapter(SmolProblem problem);

inline std::unique_ptr<ProblemAdapter> make_adapter(PoissonProblem p) {
  return make_poisson_adapter(std::move(p));
}
inline std::unique_ptr<ProblemAdapter> make_adapter(MaxwellProblem p) {
  return make_maxwell_adapter(std::move(p));
}
inline std::unique_ptr<ProblemAdapter> make_adapter(SmolProblem p) {
  return make_smol_adapter(std::move(p));
}

// Batched evaluator for residual terms: collects every network evaluation a
// set of terms needs, runs them in fused batches, and plays the analytic
// term seeds back through one batched reverse pass.
class TermBatch {
 public:
  // Returns the index the term's value/seed will live at.
  int add(const Term& term);
  void evaluate(const MlpParams& params);

  int size() const { return static_cast<int>(terms_.size()); }
  double value(int i) const { return values_.at(i); }
  void seed(int i, double s) { seeds_.at(i) += s; }
  void backward(const MlpParams& params, GradVector& grad);

  // Network evaluation points requested so far (compute-budget accounting).
  int eval_count() const { return n_tangent_ + n_value_; }

 private:
  struct PrimRef {
    bool tangent_path;
    int col;
  };
  struct TermRef {
    const Term* term;
    std::vector<PrimRef> prims;  // linear primitives or the two product legs
  };
  std::vector<TermRef> terms_;
  std::vector<double> values_;
  std::vector<double> seeds_;
  std::vector<Vec> tangent_x_, tangent_v_, value_x_;
  int n_tangent_ = 0, n_value_ = 0;
  Mat yt_, tt_, yv_;
  MlpCache cache_t_, cache_v_;
  bool evaluated_ = false;
};

// Loss values and seeds for one residual; used by the epoch loop and the
// verification fixtures. Each returns the raw loss value and pushes
// weight * dLoss/dTerm seeds into the batches.
double loss_standard(const ResidualSample& rs, TermBatch& batch, int main_first, int target_first,
                     double weight = 1.0);
double loss_double_sampling(const ResidualSample& rs1, const ResidualSample& rs2, TermBatch& batch,
                            int main_first, int t1_first, int t2_first, double weight = 1.0);
double loss_delayed_target(const ResidualSample& rs, double lambda, TermBatch& main_batch,
                           TermBatch& target_batch, int main_first, int target_first,
                           int reg_first, double weight = 1.0);

struct TrainOptions {
  std::uint64_t seed = 0;
  std::function<double(const MlpParams&)> evaluator;  // ground-truth MSE
  bool record_walltime = false;
  double divergence_loss = 1e6;
  double divergence_drift = 1e3;  // sup |main - target| at diagnostic points
};

struct TrainResult {
  std::vector<MetricRecord> records;
  bool diverged = false;
  MlpParams final_params;
  int evals_per_epoch_used = 0;
  std::vector<Volume> first_volumes;  // prefix log for matching checks
};

int evals_per_residual(const ProblemAdapter& adapter, const EstimatorConfig& cfg);
int balls_per_epoch(const ProblemAdapter& adapter, const EstimatorConfig& cfg);

TrainResult train(const ProblemAdapter& adapter, const MlpConfig& net_config,
                  const EstimatorConfig& cfg, const TrainOptions& options);

// Empirical excess variance (1/N) V[g] of the estimator's target side,
// averaged over freshly sampled volumes, with n_draws samples per volume.
double excess_variance_estimate(const MlpParams& params, const ProblemAdapter& adapter,
                                const EstimatorConfig& cfg, int n_balls, int n_draws, Rng& rng);

}  // namespace ipinn
