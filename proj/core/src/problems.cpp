#include "ipinn/problems.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>

namespace ipinn {

namespace {
constexpr double kPi = std::numbers::pi;
}

// --- Poisson ---------------------------------------------------------------

PoissonProblem PoissonProblem::planar_three_charges() {
  PoissonProblem p;
  p.dim = 2;
  p.ball_profile = BallProfile::PlanarFixedCharges;
  p.charges = {{Eigen::Vector2d{0.0, 0.0}, 1.0},
               {Eigen::Vector2d{-0.5, -0.5}, 1.0},
               {Eigen::Vector2d{0.5, 0.5}, 1.0}};
  return p;
}

PoissonProblem PoissonProblem::high_dim(int dim) {
  PoissonProblem p;
  p.dim = dim;
  p.ball_profile = BallProfile::HighDimUnitBall;
  p.charges = {{Vec::Zero(dim), 1.0}};
  return p;
}

void poisson_analytic(int dim, const std::vector<Charge>& charges, const Vec& x, double& potential,
                      Vec& field) {
  if (x.size() != dim) throw ConfigError("poisson_analytic: point dimension mismatch");
  const double gamma_half = std::tgamma(dim / 2.0);
  const double pi_pow = std::pow(kPi, dim / 2.0);
  potential = 0.0;
  field = Vec::Zero(dim);
  for (const Charge& c : charges) {
    const Vec delta = x - c.position;
    const double r = delta.norm();
    if (r < 1e-12) throw NumericError("poisson_analytic: evaluation at a charge location");
    if (dim == 2)
      potential += c.magnitude * std::log(r) / (2.0 * kPi);
    else
      potential += c.magnitude * gamma_half / (2.0 * pi_pow * (2.0 - dim)) * std::pow(r, 2 - dim);
    field += c.magnitude * gamma_half / (2.0 * pi_pow * std::pow(r, dim)) * delta;
  }
}

namespace {

Term flux_term(const SurfaceSample& s, double coeff) {
  LinearTerm lin;
  lin.points.push_back({s.point, s.direction});
  lin.w_value.push_back(Vec::Zero(1));
  lin.w_tangent.push_back(Vec::Ones(1));
  return {coeff, 0, std::move(lin)};
}

// (curl A) . tangent assembled from the three coordinate-direction tangents.
Term circulation_term(const SurfaceSample& s, double coeff) {
  const Vec& t = s.direction;
  LinearTerm lin;
  for (int k = 0; k < 3; ++k) {
    lin.points.push_back({s.point, Vec(Eigen::Vector3d::Unit(k))});
    lin.w_value.push_back(Vec::Zero(3));
  }
  lin.w_tangent.resize(3);
  lin.w_tangent[0] = Eigen::Vector3d{0.0, t[2], -t[1]};
  lin.w_tangent[1] = Eigen::Vector3d{-t[2], 0.0, t[0]};
  lin.w_tangent[2] = Eigen::Vector3d{t[1], -t[0], 0.0};
  return {coeff, 0, std::move(lin)};
}

// Shared main/target split and M-weighting for the two flux problems.
template <typename MakeTerm>
ResidualSample assemble_split(const std::vector<SurfaceSample>& samples, double area, double label,
                              int n_main, int n_target, int scale_m, MakeTerm make_term) {
  const int total = n_main + n_target;
  ResidualSample rs;
  rs.label = label;
  rs.scale_m = scale_m > 0 ? scale_m : total;
  rs.main_weight = static_cast<double>(n_main) / rs.scale_m;
  rs.target_weight = static_cast<double>(rs.scale_m - n_main) / rs.scale_m;
  for (int i = 0; i < total; ++i) {
    // samples carry normalized quadrature weights; total * w = 1 when uniform
    const double riemann = area * samples[i].weight * total;
    if (i < n_main)
      rs.main_terms.push_back(make_term(samples[i], riemann / n_main));
    else
      rs.target_terms.push_back(make_term(samples[i], -riemann / n_target));
  }
  return rs;
}

}  // namespace

ResidualSample poisson_residual(const PoissonProblem& problem, const Ball& ball, SamplerKind kind,
                                int n_main, int n_target, Rng& rng, int scale_m) {
  if (n_main < 1) throw ConfigError("poisson_residual: need at least one main point");
  if (n_target < 0) throw ConfigError("poisson_residual: n_target must be >= 0");
  auto samples = sample_surface(ball, n_main + n_target, kind, rng);
  const double area = surface_area(problem.dim, ball.radius);
  return assemble_split(samples, area, enclosed_charge(ball, problem.charges), n_main, n_target,
                        scale_m, flux_term);
}

// --- Maxwell -----------------------------------------------------------------

MaxwellProblem MaxwellProblem::rectangular_circuit() {
  const double s = 1.0 / std::sqrt(3.0);
  const Eigen::Vector3d v1{s, -s, -s}, v2{s, s, s}, v3{-s, s, s}, v4{-s, -s, -s};
  MaxwellProblem p;
  p.segments = {{v1, v2}, {v2, v3}, {v3, v4}, {v4, v1}};
  return p;
}

void MaxwellProblem::validate() const {
  if (segments.empty()) throw ConfigError("maxwell problem: no wire segments");
  for (size_t i = 0; i < segments.size(); ++i) {
    if ((segments[i].b - segments[i].a).norm() < 1e-14)
      throw ConfigError("maxwell problem: zero-length wire segment");
    const Eigen::Vector3d& next = segments[(i + 1) % segments.size()].a;
    if ((segments[i].b - next).norm() > 1e-12)
      throw ConfigError("maxwell problem: wire segments do not chain into a closed loop");
  }
}

void maxwell_analytic(const MaxwellProblem& problem, const Eigen::Vector3d& x, Eigen::Vector3d& a,
                      Eigen::Vector3d& b) {
  a.setZero();
  b.setZero();
  const double big_i = problem.current;
  for (const WireSegment& seg : problem.segments) {
    const Eigen::Vector3d axis = seg.b - seg.a;
    const double len = axis.norm();
    const Eigen::Vector3d u = axis / len;
    const Eigen::Vector3d p = x - seg.a;
    const double zeta = p.dot(u);
    const Eigen::Vector3d radial = p - zeta * u;
    const double rho = radial.norm();
    if (rho < 1e-12) throw NumericError("maxwell_analytic: evaluation on a wire segment axis");
    // Template along the z axis with z1 = 0, z2 = len, x3 = zeta.
    const double r1 = std::sqrt(rho * rho + zeta * zeta);
    const double r2 = std::sqrt(rho * rho + (len - zeta) * (len - zeta));
    // Sign chosen so B agrees with the Biot-Savart line integral for current
    // flowing a -> b; the boundary circulation then matches enclosed_current.
    a += big_i / (4.0 * kPi) * std::log(((len - zeta) + r2) / ((-zeta) + r1)) * u;
    const double mag = big_i / (4.0 * kPi * rho) * ((len - zeta) / r2 - (-zeta) / r1);
    b += mag * u.cross(radial / rho);
  }
}

ResidualSample maxwell_residual(const MaxwellProblem& problem, const Disk& disk, SamplerKind kind,
                                int n_main, int n_target, Rng& rng, int scale_m) {
  if (n_main < 1) throw ConfigError("maxwell_residual: need at least one main point");
  if (n_target < 0) throw ConfigError("maxwell_residual: n_target must be >= 0");
  auto samples = sample_disk_boundary(disk, n_main + n_target, kind, rng);
  const double length = 2.0 * kPi * disk.radius;
  return assemble_split(samples, length, enclosed_current(disk, problem.segments, problem.current),
                        n_main, n_target, scale_m, circulation_term);
}

// --- Smoluchowski ------------------------------------------------------------

double smol_kernel(const SmolProblem& problem, double x, double xp) {
  const double s = std::min(problem.kernel_cap, std::sqrt(x) + std::sqrt(xp));
  return problem.kernel_c * s * s * s;
}

ResidualSample smol_residual(const SmolProblem& problem, double x, double t, int n_target,
                             Rng& rng) {
  if (n_target < 1) throw ConfigError("smol_residual: n_target must be >= 1");
  if (x < 0.0 || x > 1.0 || t < 0.0 || t > 1.0)
    throw ConfigError("smol_residual: (x, t) must lie in the unit square");
  ResidualSample rs;
  rs.label = 0.0;
  rs.scale_m = n_target;
  rs.main_weight = 1.0;
  rs.target_weight = 1.0;

  LinearTerm ddt;
  ddt.points.push_back({Eigen::Vector2d{x, t}, Eigen::Vector2d{0.0, 1.0}});
  ddt.w_value.push_back(Vec::Zero(1));
  ddt.w_tangent.push_back(Vec::Ones(1));
  rs.main_terms.push_back({1.0, 0, std::move(ddt)});

  const double gain_factor = problem.conventional_half_gain ? 0.5 : 1.0;
  for (int i = 0; i < n_target; ++i) {
    const double xp = rng.uniform01() * x;  // gain: x' ~ Unif(0, x)
    ProductTerm gain;
    gain.a = {Eigen::Vector2d{x - xp, t}, {}};
    gain.b = {Eigen::Vector2d{xp, t}, {}};
    gain.scale = gain_factor * smol_kernel(problem, x - xp, xp);
    rs.target_terms.push_back({x / n_target, 0, std::move(gain)});
  }
  for (int i = 0; i < n_target; ++i) {
    const double xp = rng.uniform01();  // loss: x' ~ Unif(0, 1)
    ProductTerm loss;
    loss.a = {Eigen::Vector2d{x, t}, {}};
    loss.b = {Eigen::Vector2d{xp, t}, {}};
    loss.scale = smol_kernel(problem, x, xp);
    rs.target_terms.push_back({-1.0 / n_target, 1, std::move(loss)});
  }
  return rs;
}

GroundTruthGrid smol_ground_truth(const SmolProblem& problem, int n_x, int n_t) {
  if (n_x < 2 || n_t < 2) throw ConfigError("smol_ground_truth: grids need at least 2 points");
  GroundTruthGrid grid;
  grid.xs = Vec::LinSpaced(n_x, 0.0, 1.0);
  grid.ts = Vec::LinSpaced(n_t, 0.0, 1.0);
  grid.density = Mat::Zero(n_t, n_x);
  for (int i = 0; i < n_x; ++i) grid.density(0, i) = problem.n0(grid.xs[i]);

  Mat kernel(n_x, n_x);
  for (int i = 0; i < n_x; ++i)
    for (int j = 0; j <= i; ++j) kernel(i, j) = kernel(j, i) = smol_kernel(problem, grid.xs[i], grid.xs[j]);

  const double h = 1.0 / (n_x - 1);
  const double dt = 1.0 / (n_t - 1);
  const double gain_factor = problem.conventional_half_gain ? 0.5 : 1.0;
  Vec n = grid.density.row(0).transpose();
  Vec dndt(n_x);
  for (int step = 1; step < n_t; ++step) {
    for (int i = 0; i < n_x; ++i) {
      // gain: trapezoid of K(x_i - s, s) n(x_i - s) n(s) over s in [0, x_i];
      // the uniform grid makes x_i - x_j land on grid index i - j.
      double gain = 0.0;
      if (i >= 1) {
        for (int j = 1; j < i; ++j) gain += kernel(i - j, j) * n[i - j] * n[j];
        gain += 0.5 * (kernel(i, 0) * n[i] * n[0] + kernel(0, i) * n[0] * n[i]);
        gain *= h;
      }
      double loss = 0.0;
      for (int j = 1; j < n_x - 1; ++j) loss += kernel(i, j) * n[j];
      loss += 0.5 * (kernel(i, 0) * n[0] + kernel(i, n_x - 1) * n[n_x - 1]);
      loss *= h * n[i];
      dndt[i] = gain_factor * gain - loss;
    }
    n += dt * dndt;
    if (!n.allFinite() || n.cwiseAbs().maxCoeff() > 1e6)
      throw NumericError("smol_ground_truth: Euler integration unstable at time step " +
                         std::to_string(step) + "; refine the time grid");
    grid.density.row(step) = n.transpose();
  }
  return grid;
}

void GroundTruthGrid::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open grid file for writing: " + path);
  const char magic[4] = {'S', 'G', 'T', '1'};
  out.write(magic, 4);
  const std::int64_t nx = xs.size(), nt = ts.size();
  out.write(reinterpret_cast<const char*>(&nx), 8);
  out.write(reinterpret_cast<const char*>(&nt), 8);
  out.write(reinterpret_cast<const char*>(xs.data()), nx * 8);
  out.write(reinterpret_cast<const char*>(ts.data()), nt * 8);
  for (std::int64_t r = 0; r < nt; ++r) {
    Vec row = density.row(r).transpose();
    out.write(reinterpret_cast<const char*>(row.data()), nx * 8);
  }
  if (!out) throw ConfigError("failed writing grid file: " + path);
}

GroundTruthGrid GroundTruthGrid::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open grid file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "SGT1")
    throw ConfigError("not a ground-truth grid file: " + path);
  std::int64_t nx = 0, nt = 0;
  in.read(reinterpret_cast<char*>(&nx), 8);
  in.read(reinterpret_cast<char*>(&nt), 8);
  if (!in || nx < 2 || nt < 2) throw ConfigError("corrupt grid header: " + path);
  GroundTruthGrid grid;
  grid.xs = Vec(nx);
  grid.ts = Vec(nt);
  grid.density = Mat(nt, nx);
  in.read(reinterpret_cast<char*>(grid.xs.data()), nx * 8);
  in.read(reinterpret_cast<char*>(grid.ts.data()), nt * 8);
  Vec row(nx);
  for (std::int64_t r = 0; r < nt; ++r) {
    in.read(reinterpret_cast<char*>(row.data()), nx * 8);
    grid.density.row(r) = row.transpose();
  }
  if (!in) throw ConfigError("truncated grid file: " + path);
  return grid;
}

double grid_lookup(const GroundTruthGrid& grid, double x, double t) {
  auto locate = [](const Vec& axis, double v, int& idx, double& frac) {
    const int n = static_cast<int>(axis.size());
    const double pos = (v - axis[0]) / (axis[n - 1] - axis[0]) * (n - 1);
    idx = std::min(std::max(static_cast<int>(std::floor(pos)), 0), n - 2);
    frac = std::min(std::max(pos - idx, 0.0), 1.0);
  };
  int ix, it;
  double fx, ft;
  locate(grid.xs, x, ix, fx);
  locate(grid.ts, t, it, ft);
  const double lower =
      (1.0 - fx) * grid.density(it, ix) + fx * grid.density(it, ix + 1);
  const double upper =
      (1.0 - fx) * grid.density(it + 1, ix) + fx * grid.density(it + 1, ix + 1);
  return (1.0 - ft) * lower + ft * upper;
}

double initial_condition_loss(const MlpParams& net, const SmolProblem& problem, int n_points,
                              Rng& rng, GradVector* grad) {
  if (n_points < 1) throw ConfigError("initial_condition_loss: n_points must be >= 1");
  Mat x(2, n_points);
  Vec target(n_points);
  for (int i = 0; i < n_points; ++i) {
    const double xi = rng.uniform01();
    x(0, i) = xi;
    x(1, i) = 0.0;
    target[i] = problem.n0(xi);
  }
  MlpCache cache;
  Mat y = forward_batch(net, x, grad ? &cache : nullptr);
  Vec err = y.row(0).transpose() - target;
  const double loss = problem.ic_weight * err.squaredNorm() / n_points;
  if (grad) {
    Mat dy = (2.0 * problem.ic_weight / n_points) * err.transpose();
    backward_batch(net, cache, dy, nullptr, *grad);
  }
  return loss;
}

}  // namespace ipinn
