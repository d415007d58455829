#pragma once

#include <array>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "ipinn/geometry.hpp"
#include "ipinn/nn.hpp"

namespace ipinn {

// One network evaluation request: a point, and optionally a unit input
// direction along which the tangent channel is seeded.
struct EvalPoint {
  Vec x;
  Vec dir;  // empty -> value-only evaluation
};

// Scalar built as a weighted combination of network values/tangents at one or
// more points: sum_p sum_o (w_value[p][o] * value + w_tangent[p][o] * tangent).
// A single flux point uses one primitive; the curl contraction uses three.
struct LinearTerm {
  std::vector<EvalPoint> points;
  std::vector<Vec> w_value;
  std::vector<Vec> w_tangent;
};

// scale * value(a) * value(b) for single-output networks (coagulation terms).
struct ProductTerm {
  EvalPoint a;
  EvalPoint b;
  double scale = 1.0;
};

struct Term {
  double coeff = 0.0;  // signed Riemann coefficient
  int group = 0;       // variance group (coagulation gain=0 / loss=1)
  std::variant<LinearTerm, ProductTerm> body;
};

// One assembled residual instance. The residual value is
//   r = main_weight * sum(main coeff*eval) - target_weight * sum(target coeff*eval) - label.
// Target coefficients carry the sign that makes sum(|coeff|) equal the full
// integral scale (surface area, circumference, or gain+loss bounds).
struct ResidualSample {
  std::vector<Term> main_terms;
  std::vector<Term> target_terms;
  double label = 0.0;
  int scale_m = 0;
  double main_weight = 1.0;
  double target_weight = 1.0;
};

// --- Poisson ---------------------------------------------------------------

struct PoissonProblem {
  int dim = 2;
  std::vector<Charge> charges;
  BallProfile ball_profile = BallProfile::PlanarFixedCharges;

  // Three unit charges at (0,0), (-0.5,-0.5), (0.5,0.5).
  static PoissonProblem planar_three_charges();
  // Single unit charge at the origin, balls drawn inside the unit ball.
  static PoissonProblem high_dim(int dim);
};

// Potential and field of superposed point charges. Throws NumericError at a
// charge location.
void poisson_analytic(int dim, const std::vector<Charge>& charges, const Vec& x, double& potential,
                      Vec& field);

// n_main points with coefficient A/n_main, n_target with -A/n_target; label is
// the enclosed charge. scale_m <= 0 selects the plain Riemann split
// M = n_main + n_target with equal main/target weighting.
ResidualSample poisson_residual(const PoissonProblem& problem, const Ball& ball, SamplerKind kind,
                                int n_main, int n_target, Rng& rng, int scale_m = 0);

// --- Maxwell (Ampere circuital law) -----------------------------------------

struct MaxwellProblem {
  std::vector<WireSegment> segments;
  double current = 1.0;

  // Rectangular circuit with vertices at the (+-1/sqrt(3)) pattern.
  static MaxwellProblem rectangular_circuit();
  void validate() const;  // segments must chain into a closed loop
};

// Superposed closed-form potential/field of the wire segments. Throws
// NumericError on the axis of any segment.
void maxwell_analytic(const MaxwellProblem& problem, const Eigen::Vector3d& x, Eigen::Vector3d& a,
                      Eigen::Vector3d& b);

ResidualSample maxwell_residual(const MaxwellProblem& problem, const Disk& disk, SamplerKind kind,
                                int n_main, int n_target, Rng& rng, int scale_m = 0);

// --- Smoluchowski coagulation ----------------------------------------------

struct SmolProblem {
  double kernel_c = 1.23;
  double kernel_cap = 1.14;
  double ic_weight = 1.0;
  int ic_points = 100;                  // initial-condition points per epoch
  bool conventional_half_gain = false;  // apply the textbook 1/2 gain factor
  std::function<double(double)> n0 = [](double) { return 1.0; };
};

double smol_kernel(const SmolProblem& problem, double x, double xp);

// Main side: time derivative of n_theta at (x,t). Target side: n gain points
// (coeff x/n, group 0) and n loss points (coeff -1/n, group 1); label 0.
ResidualSample smol_residual(const SmolProblem& problem, double x, double t, int n_target,
                             Rng& rng);

struct GroundTruthGrid {
  Vec xs;       // size grid on [0,1]
  Vec ts;       // time grid on [0,1]
  Mat density;  // n_t rows, n_x columns; row 0 = n0 on xs

  void save(const std::string& path) const;
  static GroundTruthGrid load(const std::string& path);
};

// Forward Euler in time with full trapezoidal sums for the gain/loss
// integrals. Aborts with NumericError if any |n| exceeds 1e6.
GroundTruthGrid smol_ground_truth(const SmolProblem& problem, int n_x, int n_t);

// Evaluates n on the grid by bilinear interpolation.
double grid_lookup(const GroundTruthGrid& grid, double x, double t);

// ic_weight * MSE between n_theta(x, 0) and n0(x) over x ~ Unif[0,1].
// When `grad` is non-null the parameter gradient is accumulated into it.
double initial_condition_loss(const MlpParams& net, const SmolProblem& problem, int n_points,
                              Rng& rng, GradVector* grad = nullptr);

}  // namespace ipinn
