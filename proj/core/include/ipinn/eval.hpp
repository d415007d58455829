#pragma once

#include <variant>
#include <vector>

#include "ipinn/common.hpp"
#include "ipinn/nn.hpp"
#include "ipinn/problems.hpp"
#include "ipinn/rng.hpp"
#include "ipinn/trainers.hpp"

namespace ipinn {

// How a trained network is compared against ground truth.
struct PoissonRobustGrid {
  int q = 100;  // radii quantiles
  int s = 100;  // random directions
  int t = 1000; // radius samples feeding the quantiles
};

struct MaxwellIid {
  int n = 1000;
  bool mean_subtract_only = true;
};

struct SmolGrid {  // compares against an integrated ground-truth grid
  int nx = 129;
  int nt = 1025;
};

using EvalProfile = std::variant<PoissonRobustGrid, MaxwellIid, SmolGrid>;

// Fixed q x s evaluation grid for rotation-invariant potential problems.
// Radii are the q mid-quantiles ((2i-1)/2q) of t radii of points drawn
// uniformly inside training volumes; directions are s normalized Gaussian
// vectors. Once built, the metric is a pure function of the parameters.
class PoissonEvalGrid {
 public:
  PoissonEvalGrid(const PoissonProblem& problem, const PoissonRobustGrid& profile, Rng& rng);

  // Mean squared difference after both the net output and the analytic
  // potential are normalized to zero mean / unit variance over the grid.
  // Throws NumericError when either output has (near-)zero variance.
  double mse(const MlpParams& net) const;

  const Mat& points() const { return points_; }
  const Vec& truth() const { return truth_; }

 private:
  Mat points_;  // dim x (q*s)
  Vec truth_;   // analytic potential per column
};

// Fixed set of i.i.d. points uniform in training disks. Compares the net's
// vector potential componentwise against the analytic one, mean-subtracting
// each component (no variance scaling); the three component MSEs are
// averaged. curl_mse compares the derived magnetic field the same way.
class MaxwellEvalSet {
 public:
  MaxwellEvalSet(const MaxwellProblem& problem, const MaxwellIid& profile, Rng& rng);

  double mse(const MlpParams& net) const;       // headline: potential comparison
  double curl_mse(const MlpParams& net) const;  // secondary: field comparison

  const Mat& points() const { return points_; }

 private:
  Mat points_;        // 3 x n
  Mat truth_a_;       // 3 x n
  Mat truth_b_;       // 3 x n
};

// Raw MSE between the net and the stored densities over the full (x,t) grid.
double smol_eval(const MlpParams& net, const GroundTruthGrid& grid);

// Record with the smallest eval_mse; ties resolve to the earliest epoch.
// Throws ConfigError on an empty stream.
const MetricRecord& best_epoch(const std::vector<MetricRecord>& records);

}  // namespace ipinn
