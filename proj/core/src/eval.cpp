#include "ipinn/eval.hpp"

#include <algorithm>
#include <cmath>

namespace ipinn {

namespace {

Vec uniform_point_in_ball(const Ball& ball, Rng& rng) {
  const int d = ball.dim();
  Vec g(d);
  double norm2 = 0.0;
  do {
    for (int i = 0; i < d; ++i) g[i] = rng.normal();
    norm2 = g.squaredNorm();
  } while (norm2 < 1e-24);
  const double r = ball.radius * std::pow(rng.uniform01(), 1.0 / d);
  return ball.center + g * (r / std::sqrt(norm2));
}

// Normalize to zero mean / unit variance in place; throws on degenerate data.
void normalize_grid(Vec& v, const char* what) {
  v.array() -= v.mean();
  const double var = v.squaredNorm() / static_cast<double>(v.size());
  if (!(var > 1e-24)) throw NumericError(std::string(what) + ": output variance is degenerate");
  v /= std::sqrt(var);
}

}  // namespace

PoissonEvalGrid::PoissonEvalGrid(const PoissonProblem& problem, const PoissonRobustGrid& profile,
                                 Rng& rng) {
  if (profile.q < 1 || profile.s < 1 || profile.t < 1)
    throw ConfigError("poisson eval grid: q, s, t must be >= 1");
  const int d = problem.dim;

  std::vector<double> radii(profile.t);
  for (int i = 0; i < profile.t; ++i) {
    const Ball ball = sample_training_ball(d, problem.ball_profile, rng);
    radii[i] = uniform_point_in_ball(ball, rng).norm();
  }
  std::sort(radii.begin(), radii.end());

  Vec quantiles(profile.q);
  for (int i = 0; i < profile.q; ++i) {
    const double p = (2.0 * i + 1.0) / (2.0 * profile.q);  // mid-quantile levels
    const int idx = std::min<int>(profile.t - 1, static_cast<int>(p * profile.t));
    quantiles[i] = radii[idx];
  }

  Mat dirs(d, profile.s);
  for (int j = 0; j < profile.s; ++j) {
    Vec g(d);
    double norm = 0.0;
    do {
      for (int i = 0; i < d; ++i) g[i] = rng.normal();
      norm = g.norm();
    } while (norm < 1e-12);
    dirs.col(j) = g / norm;
  }

  points_ = Mat(d, profile.q * profile.s);
  truth_ = Vec(profile.q * profile.s);
  Vec field;
  for (int i = 0; i < profile.q; ++i)
    for (int j = 0; j < profile.s; ++j) {
      const int col = i * profile.s + j;
      points_.col(col) = quantiles[i] * dirs.col(j);
      double u = 0.0;
      poisson_analytic(d, problem.charges, points_.col(col), u, field);
      truth_[col] = u;
    }
  normalize_grid(truth_, "poisson eval grid (analytic)");
}

double PoissonEvalGrid::mse(const MlpParams& net) const {
  if (net.config.input_dim != points_.rows() || net.config.output_dim != 1)
    throw ConfigError("poisson eval: network shape mismatch");
  const Mat out = forward_batch(net, points_);
  Vec pred = out.row(0).transpose();
  normalize_grid(pred, "poisson eval (network)");
  return (pred - truth_).squaredNorm() / static_cast<double>(truth_.size());
}

MaxwellEvalSet::MaxwellEvalSet(const MaxwellProblem& problem, const MaxwellIid& profile, Rng& rng) {
  if (profile.n < 2) throw ConfigError("maxwell eval: need at least 2 points");
  points_ = Mat(3, profile.n);
  truth_a_ = Mat(3, profile.n);
  truth_b_ = Mat(3, profile.n);
  for (int j = 0; j < profile.n; ++j) {
    Eigen::Vector3d x, a, b;
    for (int tries = 0;; ++tries) {
      const Disk disk = sample_training_disk(rng);
      Eigen::Vector3d u, w;
      disk_frame(disk.normal, u, w);
      const double r = disk.radius * std::sqrt(rng.uniform01());
      const double phi = rng.uniform(0.0, 2.0 * M_PI);
      x = disk.center + r * (std::cos(phi) * u + std::sin(phi) * w);
      try {
        maxwell_analytic(problem, x, a, b);
        break;
      } catch (const NumericError&) {  // redraw points that landed on the wire
        if (tries > 100) throw;
      }
    }
    points_.col(j) = x;
    truth_a_.col(j) = a;
    truth_b_.col(j) = b;
  }
}

namespace {
double mean_subtracted_mse(Mat pred, Mat truth) {
  double total = 0.0;
  for (int c = 0; c < pred.rows(); ++c) {
    Vec p = pred.row(c).transpose();
    Vec g = truth.row(c).transpose();
    p.array() -= p.mean();
    g.array() -= g.mean();
    total += (p - g).squaredNorm() / static_cast<double>(p.size());
  }
  return total / static_cast<double>(pred.rows());
}
}  // namespace

double MaxwellEvalSet::mse(const MlpParams& net) const {
  if (net.config.input_dim != 3 || net.config.output_dim != 3)
    throw ConfigError("maxwell eval: network must map R^3 -> R^3");
  return mean_subtracted_mse(forward_batch(net, points_), truth_a_);
}

double MaxwellEvalSet::curl_mse(const MlpParams& net) const {
  if (net.config.input_dim != 3 || net.config.output_dim != 3)
    throw ConfigError("maxwell eval: network must map R^3 -> R^3");
  const int n = static_cast<int>(points_.cols());
  // One tangent pass per coordinate axis gives the full Jacobian columns.
  Mat jac[3];  // jac[k] = dA/dx_k for all points, 3 x n
  for (int k = 0; k < 3; ++k) {
    Mat v = Mat::Zero(3, n);
    v.row(k).setOnes();
    Mat y, t;
    forward_tangent_batch(net, points_, v, y, t);
    jac[k] = t;
  }
  Mat curl(3, n);
  curl.row(0) = jac[1].row(2) - jac[2].row(1);  // dAz/dy - dAy/dz
  curl.row(1) = jac[2].row(0) - jac[0].row(2);  // dAx/dz - dAz/dx
  curl.row(2) = jac[0].row(1) - jac[1].row(0);  // dAy/dx - dAx/dy
  return mean_subtracted_mse(curl, truth_b_);
}

double smol_eval(const MlpParams& net, const GroundTruthGrid& grid) {
  if (net.config.input_dim != 2 || net.config.output_dim != 1)
    throw ConfigError("smol eval: network must map (x,t) -> density");
  const int nx = static_cast<int>(grid.xs.size());
  const int nt = static_cast<int>(grid.ts.size());
  Mat pts(2, nx * nt);
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < nx; ++j) {
      pts(0, i * nx + j) = grid.xs[j];
      pts(1, i * nx + j) = grid.ts[i];
    }
  const Mat out = forward_batch(net, pts);
  double total = 0.0;
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < nx; ++j) {
      const double diff = out(0, i * nx + j) - grid.density(i, j);
      total += diff * diff;
    }
  return total / static_cast<double>(nx * nt);
}

const MetricRecord& best_epoch(const std::vector<MetricRecord>& records) {
  if (records.empty()) throw ConfigError("best_epoch: empty metric stream");
  const MetricRecord* best = &records.front();
  for (const auto& r : records)
    if (r.eval_mse < best->eval_mse) best = &r;
  return *best;
}

}  // namespace ipinn
