#include "ipinn/geometry.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <numbers>

namespace ipinn {

namespace {
constexpr double kPi = std::numbers::pi;
}

SamplerKind sampler_from_string(const std::string& s) {
  if (s == "iid_gaussian") return SamplerKind::IidGaussianNormalized;
  if (s == "iid_intrinsic") return SamplerKind::IidIntrinsic;
  if (s == "lattice") return SamplerKind::DeterministicLattice;
  if (s == "qmc") return SamplerKind::QmcAdditiveRecursion;
  if (s == "gauss_legendre") return SamplerKind::GaussLegendre;
  throw ConfigError("unknown sampler '" + s +
                    "' (expected iid_gaussian|iid_intrinsic|lattice|qmc|gauss_legendre)");
}

std::string to_string(SamplerKind k) {
  switch (k) {
    case SamplerKind::IidGaussianNormalized: return "iid_gaussian";
    case SamplerKind::IidIntrinsic: return "iid_intrinsic";
    case SamplerKind::DeterministicLattice: return "lattice";
    case SamplerKind::QmcAdditiveRecursion: return "qmc";
    case SamplerKind::GaussLegendre: return "gauss_legendre";
  }
  return "?";
}

bool sampler_is_deterministic(SamplerKind k) {
  return k == SamplerKind::DeterministicLattice || k == SamplerKind::GaussLegendre;
}

double surface_area(int d, double r) {
  if (d < 1 || r <= 0.0) throw ConfigError("surface_area: need d >= 1 and r > 0");
  return 2.0 * std::pow(kPi, d / 2.0) / std::tgamma(d / 2.0) * std::pow(r, d - 1);
}

Ball sample_training_ball(int dim, BallProfile profile, Rng& rng) {
  if (dim < 1) throw ConfigError("sample_training_ball: dim must be >= 1");
  Ball ball;
  ball.center = Vec::Zero(dim);
  if (profile == BallProfile::PlanarFixedCharges) {
    for (int i = 0; i < dim; ++i) ball.center[i] = rng.uniform(-1.0, 1.0);
    ball.radius = rng.uniform(0.1, 1.5);
  } else {
    // Center uniform in the unit ball: normalized Gaussian direction scaled
    // by U^{1/d}; ball volume uniform on (0, V_unit], i.e. radius = U^{1/d}.
    Vec g(dim);
    for (int i = 0; i < dim; ++i) g[i] = rng.normal();
    const double u_center = rng.uniform01();
    ball.center = g / g.norm() * std::pow(u_center, 1.0 / dim);
    const double u_vol = 1.0 - rng.uniform01();  // (0, 1]
    ball.radius = std::pow(u_vol, 1.0 / dim);
  }
  return ball;
}

Disk sample_training_disk(Rng& rng) {
  Disk disk;
  auto ball_point = [&rng]() {
    Eigen::Vector3d g{rng.normal(), rng.normal(), rng.normal()};
    return Eigen::Vector3d(g / g.norm() * std::cbrt(rng.uniform01()));
  };
  disk.center = ball_point();
  Eigen::Vector3d n = ball_point();
  while (n.norm() < 1e-12) n = ball_point();
  disk.normal = n / n.norm();
  disk.radius = std::sqrt(rng.uniform01());
  return disk;
}

Vec intrinsic_sphere_map(const Vec& u, int d) {
  if (u.size() != d - 1) throw ConfigError("intrinsic_sphere_map: expected d-1 coordinates");
  if (d == 1) throw ConfigError("intrinsic_sphere_map: d must be >= 2");
  if (d == 2) {
    const double phi = 2.0 * kPi * u[0];
    return Eigen::Vector2d{std::cos(phi), std::sin(phi)};
  }
  // Spherical angles theta_1..theta_{d-2} in [0, pi] with densities
  // proportional to sin^{d-1-k}, plus a uniform azimuth. Each polar angle is
  // obtained by inverting its CDF; the sin-power antiderivative follows the
  // standard reduction formula, so Newton steps are cheap and exact.
  auto sin_power_integral = [](int m, double theta) {
    // I_m(theta) = int_0^theta sin^m t dt
    double i0 = theta;            // m = 0
    double i1 = 1.0 - std::cos(theta);  // m = 1
    if (m == 0) return i0;
    if (m == 1) return i1;
    double prev = i0, cur = i1;
    for (int k = 2; k <= m; ++k) {
      double next =
          (-std::pow(std::sin(theta), k - 1) * std::cos(theta) + (k - 1) * prev) / k;
      prev = cur;
      cur = next;
    }
    return cur;
  };
  Vec x = Vec::Ones(d);
  double sin_prod = 1.0;
  for (int k = 0; k < d - 2; ++k) {
    const int m = d - 2 - k;  // sin power for this angle
    const double total = sin_power_integral(m, kPi);
    const double target = std::min(std::max(u[k], 0.0), 1.0 - 1e-16) * total;
    // Monotone scalar root-find: Newton with bisection safeguarding.
    double lo = 0.0, hi = kPi, theta = kPi * u[k];
    for (int it = 0; it < 80; ++it) {
      const double f = sin_power_integral(m, theta) - target;
      (f > 0.0 ? hi : lo) = theta;
      const double df = std::pow(std::sin(theta), m);
      double step = df > 1e-300 ? theta - f / df : 0.5 * (lo + hi);
      theta = (step > lo && step < hi) ? step : 0.5 * (lo + hi);
      if (hi - lo < 1e-15) break;
    }
    x[k] = sin_prod * std::cos(theta);
    sin_prod *= std::sin(theta);
  }
  const double phi = 2.0 * kPi * u[d - 2];
  x[d - 2] = sin_prod * std::cos(phi);
  x[d - 1] = sin_prod * std::sin(phi);
  return x;
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw ConfigError("gauss_legendre: n must be >= 1");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Chebyshev-based initial guess, then Newton on P_n.
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
  if (n == 1) {
    nodes[0] = 0.0;
    weights[0] = 2.0;
  }
}

namespace {

SurfaceSample on_ball(const Ball& ball, const Vec& unit_dir, double weight) {
  SurfaceSample s;
  s.direction = unit_dir;
  s.point = ball.center + ball.radius * unit_dir;
  s.weight = weight;
  return s;
}

// Kronecker/additive-recursion alphas from the generalized golden ratio
// (plastic-number family): gamma solves x^{s+1} = x + 1.
Vec qmc_alphas(int s) {
  double g = 1.5;
  for (int it = 0; it < 100; ++it) g = std::pow(1.0 + g, 1.0 / (s + 1));
  Vec alpha(s);
  double p = 1.0;
  for (int j = 0; j < s; ++j) {
    p /= g;
    alpha[j] = p;
  }
  return alpha;
}

double frac(double x) { return x - std::floor(x); }

// Deterministic per-volume offset in [0,1): the lattice must yield identical
// points whenever the same volume is drawn, so the offset hashes the geometry
// instead of consuming the rng.
double geometry_unit_hash(const double* data, int count) {
  std::uint64_t h = 1469598103934665603ULL;
  for (int i = 0; i < count; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &data[i], sizeof(bits));
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xff;
      h *= 1099511628211ULL;
    }
  }
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double ball_unit_hash(const Ball& ball) {
  std::vector<double> data(ball.center.data(), ball.center.data() + ball.center.size());
  data.push_back(ball.radius);
  return geometry_unit_hash(data.data(), static_cast<int>(data.size()));
}

double disk_unit_hash(const Disk& disk) {
  const double data[7] = {disk.center.x(),  disk.center.y(), disk.center.z(), disk.normal.x(),
                          disk.normal.y(), disk.normal.z(), disk.radius};
  return geometry_unit_hash(data, 7);
}

std::vector<SurfaceSample> sphere_lattice(const Ball& ball, int n) {
  const int d = ball.dim();
  if (d == 2) return circle_lattice(ball, n, 2.0 * kPi * ball_unit_hash(ball));
  // Rank-1 lattice on [0,1)^{d-1} with a random per-ball shift, pushed through
  // the area-preserving map.
  const int s = d - 1;
  Vec gen(s);
  const Vec alpha = qmc_alphas(s);
  for (int j = 0; j < s; ++j) {
    long long a = static_cast<long long>(std::llround(alpha[j] * n)) | 1LL;
    gen[j] = static_cast<double>(a % n);
  }
  Vec shift(s);
  const double base = ball_unit_hash(ball);
  for (int j = 0; j < s; ++j) shift[j] = frac(base + alpha[j]);
  std::vector<SurfaceSample> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) {
    Vec u(s);
    for (int j = 0; j < s; ++j) u[j] = frac(k * gen[j] / n + shift[j]);
    out.push_back(on_ball(ball, intrinsic_sphere_map(u, d), 1.0 / n));
  }
  return out;
}

std::vector<SurfaceSample> sphere_gauss_legendre(const Ball& ball, int n) {
  const int d = ball.dim();
  std::vector<double> nodes, weights;
  std::vector<SurfaceSample> out;
  if (d == 2) {
    gauss_legendre(n, nodes, weights);
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
      const double phi = kPi * (nodes[i] + 1.0);  // [ -1,1 ] -> [0, 2pi)
      Vec dir = Eigen::Vector2d{std::cos(phi), std::sin(phi)};
      out.push_back(on_ball(ball, dir, weights[i] / 2.0));
    }
    return out;
  }
  if (d == 3) {
    // Product rule: Gauss-Legendre in cos(theta), uniform in azimuth.
    const int n_theta = std::max(1, static_cast<int>(std::llround(std::sqrt(n / 2.0))));
    const int n_phi = std::max(1, (n + n_theta - 1) / n_theta);
    gauss_legendre(n_theta, nodes, weights);
    out.reserve(static_cast<size_t>(n_theta) * n_phi);
    for (int i = 0; i < n_theta; ++i) {
      const double ct = nodes[i];
      const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
      for (int j = 0; j < n_phi; ++j) {
        const double phi = 2.0 * kPi * (j + 0.5) / n_phi;
        Vec dir = Eigen::Vector3d{st * std::cos(phi), st * std::sin(phi), ct};
        out.push_back(on_ball(ball, dir, weights[i] / 2.0 / n_phi));
      }
    }
    return out;
  }
  throw ConfigError("gauss_legendre sampler supports d in {2,3} only");
}

}  // namespace

std::vector<SurfaceSample> circle_lattice(const Ball& ball, int n, double rotation) {
  if (ball.dim() != 2) throw ConfigError("circle_lattice: ball must be 2-dimensional");
  std::vector<SurfaceSample> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double phi = rotation + 2.0 * kPi * k / n;
    Vec dir = Eigen::Vector2d{std::cos(phi), std::sin(phi)};
    out.push_back(on_ball(ball, dir, 1.0 / n));
  }
  return out;
}

std::vector<SurfaceSample> sample_surface(const Ball& ball, int n, SamplerKind kind, Rng& rng) {
  if (n < 1) throw ConfigError("sample_surface: n must be >= 1");
  const int d = ball.dim();
  std::vector<SurfaceSample> out;
  switch (kind) {
    case SamplerKind::IidGaussianNormalized: {
      out.reserve(n);
      for (int k = 0; k < n; ++k) {
        Vec g(d);
        do {
          for (int i = 0; i < d; ++i) g[i] = rng.normal();
        } while (g.norm() < 1e-12);
        out.push_back(on_ball(ball, Vec(g / g.norm()), 1.0 / n));
      }
      return out;
    }
    case SamplerKind::IidIntrinsic: {
      out.reserve(n);
      for (int k = 0; k < n; ++k) {
        Vec u(d - 1);
        for (int j = 0; j < d - 1; ++j) u[j] = rng.uniform01();
        out.push_back(on_ball(ball, intrinsic_sphere_map(u, d), 1.0 / n));
      }
      return out;
    }
    case SamplerKind::DeterministicLattice:
      return sphere_lattice(ball, n);
    case SamplerKind::QmcAdditiveRecursion: {
      const int s = d - 1;
      const Vec alpha = qmc_alphas(s);
      Vec u(s);
      for (int j = 0; j < s; ++j) u[j] = rng.uniform01();  // random start point
      out.reserve(n);
      for (int k = 0; k < n; ++k) {
        for (int j = 0; j < s; ++j) u[j] = frac(u[j] + alpha[j]);
        out.push_back(on_ball(ball, intrinsic_sphere_map(u, d), 1.0 / n));
      }
      return out;
    }
    case SamplerKind::GaussLegendre:
      return sphere_gauss_legendre(ball, n);
  }
  throw ConfigError("sample_surface: unknown sampler kind");
}

void disk_frame(const Eigen::Vector3d& normal, Eigen::Vector3d& u, Eigen::Vector3d& w) {
  const Eigen::Vector3d seed =
      std::abs(normal.x()) <= 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  u = seed - normal.dot(seed) * normal;
  u.normalize();
  w = normal.cross(u);
}

namespace {

SurfaceSample on_circle(const Disk& disk, const Eigen::Vector3d& u, const Eigen::Vector3d& w,
                        double phi, double weight) {
  SurfaceSample s;
  const Eigen::Vector3d radial = std::cos(phi) * u + std::sin(phi) * w;
  const Eigen::Vector3d tangent = -std::sin(phi) * u + std::cos(phi) * w;
  s.point = disk.center + disk.radius * radial;
  s.direction = tangent;
  s.weight = weight;
  return s;
}

}  // namespace

std::vector<SurfaceSample> disk_lattice(const Disk& disk, int n, double rotation) {
  Eigen::Vector3d u, w;
  disk_frame(disk.normal, u, w);
  std::vector<SurfaceSample> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k)
    out.push_back(on_circle(disk, u, w, rotation + 2.0 * kPi * k / n, 1.0 / n));
  return out;
}

std::vector<SurfaceSample> sample_disk_boundary(const Disk& disk, int n, SamplerKind kind,
                                                Rng& rng) {
  if (n < 1) throw ConfigError("sample_disk_boundary: n must be >= 1");
  Eigen::Vector3d u, w;
  disk_frame(disk.normal, u, w);
  std::vector<SurfaceSample> out;
  switch (kind) {
    case SamplerKind::IidGaussianNormalized:
    case SamplerKind::IidIntrinsic: {
      out.reserve(n);
      for (int k = 0; k < n; ++k)
        out.push_back(on_circle(disk, u, w, rng.uniform(0.0, 2.0 * kPi), 1.0 / n));
      return out;
    }
    case SamplerKind::DeterministicLattice:
      return disk_lattice(disk, n, 2.0 * kPi * disk_unit_hash(disk));
    case SamplerKind::QmcAdditiveRecursion: {
      const double alpha = qmc_alphas(1)[0];
      double x = rng.uniform01();
      out.reserve(n);
      for (int k = 0; k < n; ++k) {
        x = frac(x + alpha);
        out.push_back(on_circle(disk, u, w, 2.0 * kPi * x, 1.0 / n));
      }
      return out;
    }
    case SamplerKind::GaussLegendre: {
      std::vector<double> nodes, weights;
      gauss_legendre(n, nodes, weights);
      out.reserve(n);
      for (int i = 0; i < n; ++i)
        out.push_back(on_circle(disk, u, w, kPi * (nodes[i] + 1.0), weights[i] / 2.0));
      return out;
    }
  }
  throw ConfigError("sample_disk_boundary: unknown sampler kind");
}

double enclosed_charge(const Ball& ball, const std::vector<Charge>& charges) {
  double total = 0.0;
  for (const Charge& c : charges) {
    if (c.position.size() != ball.center.size())
      throw ConfigError("enclosed_charge: charge/ball dimension mismatch");
    if ((c.position - ball.center).norm() <= ball.radius) total += c.magnitude;
  }
  return total;
}

double enclosed_current(const Disk& disk, const std::vector<WireSegment>& segments,
                        double current) {
  double crossings = 0.0;
  for (const WireSegment& seg : segments) {
    const Eigen::Vector3d dir = seg.b - seg.a;
    if (dir.norm() < 1e-14) throw ConfigError("enclosed_current: zero-length wire segment");
    const double denom = dir.dot(disk.normal);
    if (std::abs(denom) < 1e-14) continue;  // segment parallel to / in the plane
    const double s = (disk.center - seg.a).dot(disk.normal) / denom;
    if (s < 0.0 || s >= 1.0) continue;  // half-open so chained endpoints count once
    const Eigen::Vector3d hit = seg.a + s * dir;
    if ((hit - disk.center).norm() <= disk.radius) crossings += denom > 0.0 ? 1.0 : -1.0;
  }
  return current * crossings;
}

}  // namespace ipinn
