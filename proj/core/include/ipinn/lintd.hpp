#pragma once

#include <functional>
#include <vector>

#include "ipinn/common.hpp"
#include "ipinn/rng.hpp"

namespace ipinn {

// Finite-state linear-function-approximation testbed:
//   features Phi (S x d), related features Psi = Lambda * Phi,
//   state distribution D_P (diagonal), conditional sampling P_cond
//   (row-stochastic), labels Y.
struct AbstractLinearSystem {
  int states = 0;    // S
  int features = 0;  // d
  Mat phi;           // S x d, rows with norm <= 1
  Mat psi;           // S x d, Psi = Lambda * Phi
  Vec d_p;           // state probabilities, all > 0, sum 1
  Mat p_cond;        // S x S, rows sum to 1
  Vec y;             // S
  Mat lambda;        // S x S

  void check() const;  // throws ConfigError when an invariant fails
};

enum class FixedPointKind { StandardFixedPoint, ProjectedFixedPoint };

struct FixedPointSolution {
  Vec theta;
  FixedPointKind kind;
};

// Random instance with sigma(P_cond * Lambda) equal to spectral_target.
AbstractLinearSystem random_system(int states, int features, double spectral_target, Rng& rng);

// D_P-weighted least-squares projection onto span(Phi).
Vec projection(const AbstractLinearSystem& sys, const Vec& h);

// U H := Y + P_cond * Lambda * H.
Vec update_op(const AbstractLinearSystem& sys, const Vec& h);

// Solves A theta = b with A = Phi^T D_P (I - P_cond Lambda) Phi, b = Phi^T D_P Y.
FixedPointSolution solve_projected_fixed_point(const AbstractLinearSystem& sys);

// Minimizer of || Phi theta - U(Phi theta) ||_{D_P}.
FixedPointSolution solve_standard_fixed_point(const AbstractLinearSystem& sys);

using RateSchedule = std::function<double(long long)>;

inline RateSchedule default_rate() {
  return [](long long t) { return 0.5 / (1.0 + t / 1000.0); };
}

struct SgdTrace {
  std::vector<Vec> thetas;  // includes theta_0; subsampled when thin > 1
  Vec final_theta;
  bool diverged = false;
};

// Stochastic-approximation iteration theta <- theta - eta_t (A_t theta - b_t)
// with A_t = phi(x) (phi(x) - psi(x'))^T and b_t = phi(x) y(x), where
// x ~ D_P and x' ~ P_cond(. | x).
SgdTrace sgd_delayed_target(const AbstractLinearSystem& sys, long long steps,
                            const RateSchedule& rate, Rng& rng, int thin = 1);

struct BoundCheck {
  double lhs = 0.0;        // || Phi theta*_DT - f* ||^2_{D_P}
  double rhs = 0.0;        // (1 / (1 - sigma)) || Pi f* - f* ||^2_{D_P}
  double sigma = 0.0;      // spectral radius of P_cond * Lambda
  bool satisfied = false;  // lhs <= rhs * (1 + 1e-9)
};

BoundCheck check_error_bound(const AbstractLinearSystem& sys);

// Largest absolute eigenvalue (dense solve; matrices are <= 200 x 200 here).
double spectral_radius(const Mat& m);

}  // namespace ipinn
