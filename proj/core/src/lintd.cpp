#include "ipinn/lintd.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace ipinn {

void AbstractLinearSystem::check() const {
  const int s = states, d = features;
  if (phi.rows() != s || phi.cols() != d || psi.rows() != s || psi.cols() != d ||
      d_p.size() != s || p_cond.rows() != s || p_cond.cols() != s || y.size() != s ||
      lambda.rows() != s || lambda.cols() != s)
    throw ConfigError("linear system: inconsistent shapes");
  if (d_p.minCoeff() <= 0.0) throw ConfigError("linear system: state probabilities must be > 0");
  if (std::abs(d_p.sum() - 1.0) > 1e-9)
    throw ConfigError("linear system: state probabilities must sum to 1");
  for (int i = 0; i < s; ++i) {
    if (std::abs(p_cond.row(i).sum() - 1.0) > 1e-9)
      throw ConfigError("linear system: conditional rows must sum to 1");
    if (phi.row(i).norm() > 1.0 + 1e-9 || psi.row(i).norm() > 1.0 + 1e-9)
      throw ConfigError("linear system: feature rows must have norm <= 1");
  }
  if ((psi - lambda * phi).cwiseAbs().maxCoeff() > 1e-9)
    throw ConfigError("linear system: Psi != Lambda * Phi");
  Eigen::FullPivLU<Mat> lu_phi(phi);
  if (lu_phi.rank() < d) throw ConfigError("linear system: Phi is rank-deficient");
  Eigen::FullPivLU<Mat> lu_psi(psi);
  if (lu_psi.rank() < d) throw ConfigError("linear system: Psi is rank-deficient");
}

double spectral_radius(const Mat& m) {
  if (m.rows() != m.cols()) throw ConfigError("spectral_radius: matrix must be square");
  Eigen::EigenSolver<Mat> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success)
    throw NumericError("spectral_radius: eigensolver did not converge");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

AbstractLinearSystem random_system(int states, int features, double spectral_target, Rng& rng) {
  if (!(states > features && features >= 1))
    throw ConfigError("random_system: need S > d >= 1");
  if (!(spectral_target > 0.0 && spectral_target < 1.0))
    throw ConfigError("random_system: spectral_target must be in (0,1)");
  for (int attempt = 0; attempt < 64; ++attempt) {
    AbstractLinearSystem sys;
    sys.states = states;
    sys.features = features;
    sys.phi = Mat(states, features);
    for (int i = 0; i < states; ++i) {
      Vec g(features);
      for (int j = 0; j < features; ++j) g[j] = rng.normal();
      if (g.norm() < 1e-12) g[0] = 1.0;
      sys.phi.row(i) = (g / g.norm()).transpose();
    }
    sys.p_cond = Mat(states, states);
    for (int i = 0; i < states; ++i) {
      for (int j = 0; j < states; ++j) sys.p_cond(i, j) = rng.uniform(0.05, 1.0);
      sys.p_cond.row(i) /= sys.p_cond.row(i).sum();
    }
    sys.d_p = Vec(states);
    for (int i = 0; i < states; ++i) sys.d_p[i] = rng.uniform(0.1, 1.0);
    sys.d_p /= sys.d_p.sum();
    sys.y = Vec(states);
    for (int i = 0; i < states; ++i) sys.y[i] = rng.uniform(-1.0, 1.0);
    sys.lambda = Mat(states, states);
    for (int i = 0; i < states; ++i)
      for (int j = 0; j < states; ++j) sys.lambda(i, j) = rng.normal();
    const double rho = spectral_radius(sys.p_cond * sys.lambda);
    if (rho < 1e-12) continue;
    sys.lambda *= spectral_target / rho;
    sys.psi = sys.lambda * sys.phi;
    // Rescaling Phi shrinks Psi's rows without moving sigma(P_cond Lambda).
    const double max_psi = sys.psi.rowwise().norm().maxCoeff();
    if (max_psi > 1.0) {
      sys.phi /= max_psi;
      sys.psi /= max_psi;
    }
    try {
      sys.check();
    } catch (const ConfigError&) {
      continue;
    }
    return sys;
  }
  throw NumericError("random_system: could not generate a valid system after bounded retries");
}

Vec projection(const AbstractLinearSystem& sys, const Vec& h) {
  if (h.size() != sys.states) throw ConfigError("projection: vector length mismatch");
  const Mat weighted = sys.d_p.asDiagonal() * sys.phi;  // D_P Phi
  const Mat normal = sys.phi.transpose() * weighted;    // Phi^T D_P Phi
  Eigen::FullPivLU<Mat> lu(normal);
  if (!lu.isInvertible()) throw NumericError("projection: normal matrix is singular (rank loss)");
  return sys.phi * lu.solve(weighted.transpose() * h);
}

Vec update_op(const AbstractLinearSystem& sys, const Vec& h) {
  if (h.size() != sys.states) throw ConfigError("update_op: vector length mismatch");
  return sys.y + sys.p_cond * (sys.lambda * h);
}

FixedPointSolution solve_projected_fixed_point(const AbstractLinearSystem& sys) {
  const Mat inner = Mat::Identity(sys.states, sys.states) - sys.p_cond * sys.lambda;
  const Mat a = sys.phi.transpose() * sys.d_p.asDiagonal() * inner * sys.phi;
  const Vec b = sys.phi.transpose() * (sys.d_p.asDiagonal() * sys.y);
  Eigen::FullPivLU<Mat> lu(a);
  if (!lu.isInvertible())
    throw NumericError("solve_projected_fixed_point: A is singular; sigma(P_cond Lambda) < 1 and "
                       "full-rank features are required");
  return {lu.solve(b), FixedPointKind::ProjectedFixedPoint};
}

FixedPointSolution solve_standard_fixed_point(const AbstractLinearSystem& sys) {
  // minimize || (I - P_cond Lambda) Phi theta - Y ||_{D_P}
  const Mat g = (Mat::Identity(sys.states, sys.states) - sys.p_cond * sys.lambda) * sys.phi;
  const Mat gram = g.transpose() * sys.d_p.asDiagonal() * g;
  const Vec rhs = g.transpose() * (sys.d_p.asDiagonal() * sys.y);
  Eigen::FullPivLU<Mat> lu(gram);
  if (!lu.isInvertible())
    throw NumericError("solve_standard_fixed_point: weighted normal matrix is singular");
  return {lu.solve(rhs), FixedPointKind::StandardFixedPoint};
}

SgdTrace sgd_delayed_target(const AbstractLinearSystem& sys, long long steps,
                            const RateSchedule& rate, Rng& rng, int thin) {
  if (thin < 1) throw ConfigError("sgd_delayed_target: thin must be >= 1");
  Vec theta = Vec::Zero(sys.features);
  SgdTrace trace;
  trace.thetas.push_back(theta);
  // Row-wise cumulative distributions for categorical draws.
  Vec state_cdf(sys.states);
  double acc = 0.0;
  for (int i = 0; i < sys.states; ++i) state_cdf[i] = (acc += sys.d_p[i]);
  Mat cond_cdf = sys.p_cond;
  for (int i = 0; i < sys.states; ++i)
    for (int j = 1; j < sys.states; ++j) cond_cdf(i, j) += cond_cdf(i, j - 1);
  auto draw = [&rng](const auto& cdf, int n) {
    const double u = rng.uniform01();
    for (int i = 0; i < n - 1; ++i)
      if (u < cdf[i]) return i;
    return n - 1;
  };
  for (long long t = 0; t < steps; ++t) {
    const int x = draw(state_cdf, sys.states);
    const int xp = draw(cond_cdf.row(x), sys.states);
    const Vec phi_x = sys.phi.row(x).transpose();
    const Vec diff = phi_x - sys.psi.row(xp).transpose();
    const double eta = rate(t);
    theta -= eta * (phi_x * (diff.dot(theta)) - phi_x * sys.y[x]);
    if (theta.norm() > 1e8) {
      trace.diverged = true;
      break;
    }
    if ((t + 1) % thin == 0) trace.thetas.push_back(theta);
  }
  trace.final_theta = theta;
  return trace;
}

BoundCheck check_error_bound(const AbstractLinearSystem& sys) {
  BoundCheck out;
  out.sigma = spectral_radius(sys.p_cond * sys.lambda);
  if (out.sigma >= 1.0)
    throw ConfigError("check_error_bound: sigma(P_cond Lambda) must be < 1");
  const Mat inner = Mat::Identity(sys.states, sys.states) - sys.p_cond * sys.lambda;
  const Vec f_star = inner.fullPivLu().solve(sys.y);
  const Vec f_dt = sys.phi * solve_projected_fixed_point(sys).theta;
  const Vec proj_err = projection(sys, f_star) - f_star;
  auto weighted_sq = [&sys](const Vec& v) { return v.dot(sys.d_p.asDiagonal() * v); };
  out.lhs = weighted_sq(f_dt - f_star);
  out.rhs = weighted_sq(proj_err) / (1.0 - out.sigma);
  out.satisfied = out.lhs <= out.rhs * (1.0 + 1e-9);
  return out;
}

}  // namespace ipinn
