#pragma once

#include <string>
#include <vector>

#include "ipinn/common.hpp"
#include "ipinn/rng.hpp"

namespace ipinn {

struct Ball {
  Vec center;
  double radius = 1.0;

  int dim() const { return static_cast<int>(center.size()); }
};

struct Disk {
  Eigen::Vector3d center;
  Eigen::Vector3d normal;  // unit length
  double radius = 1.0;
};

// One integration point on a surface/boundary. `direction` is the outward
// normal for ball surfaces and the (right-handed) unit tangent for disk
// boundaries. Weights sum to 1 over each returned set.
struct SurfaceSample {
  Vec point;
  Vec direction;
  double weight = 0.0;
};

enum class SamplerKind {
  IidGaussianNormalized,
  IidIntrinsic,
  DeterministicLattice,
  QmcAdditiveRecursion,
  GaussLegendre,
};

SamplerKind sampler_from_string(const std::string& s);
std::string to_string(SamplerKind k);
bool sampler_is_deterministic(SamplerKind k);

// Surface area of the (d-1)-sphere of radius r: 2 pi^{d/2} r^{d-1} / Gamma(d/2).
double surface_area(int d, double r);

// Which distribution the training balls follow.
enum class BallProfile {
  PlanarFixedCharges,  // center ~ Unif([-1,1]^d), radius ~ Unif([0.1,1.5])
  HighDimUnitBall,     // center uniform in the unit ball, volume ~ Unif(0, V_unit]
};

Ball sample_training_ball(int dim, BallProfile profile, Rng& rng);

// Training disk for the circuit problem: center and normal drawn from the
// unit ball (normal then normalized), squared radius ~ Unif[0,1].
Disk sample_training_disk(Rng& rng);

std::vector<SurfaceSample> sample_surface(const Ball& ball, int n, SamplerKind kind, Rng& rng);

std::vector<SurfaceSample> sample_disk_boundary(const Disk& disk, int n, SamplerKind kind,
                                                Rng& rng);

// Deterministic building blocks, exposed for direct use and tests.
std::vector<SurfaceSample> circle_lattice(const Ball& ball, int n, double rotation);
std::vector<SurfaceSample> disk_lattice(const Disk& disk, int n, double rotation);

// Area-preserving map from u in [0,1)^{d-1} onto the unit sphere S^{d-1}.
Vec intrinsic_sphere_map(const Vec& u, int d);

// Gauss-Legendre nodes/weights on [-1,1]; weights sum to 2.
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

// Right-handed orthonormal frame (u, w) completing `normal`; u x w = normal.
// For normal = +z this yields u = +x, w = +y.
void disk_frame(const Eigen::Vector3d& normal, Eigen::Vector3d& u, Eigen::Vector3d& w);

struct Charge {
  Vec position;
  double magnitude = 0.0;
};

// Sum of charge magnitudes with ||pos - center|| <= radius (boundary inside).
double enclosed_charge(const Ball& ball, const std::vector<Charge>& charges);

struct WireSegment {
  Eigen::Vector3d a;
  Eigen::Vector3d b;
};

// I times the signed count of segment crossings through the disk.
double enclosed_current(const Disk& disk, const std::vector<WireSegment>& segments, double current);

}  // namespace ipinn
