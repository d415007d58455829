#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ipinn/autodiff.hpp"
#include "ipinn/common.hpp"
#include "ipinn/rng.hpp"

namespace ipinn {

enum class Activation { SiLU, Tanh, ReLU };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

struct MlpConfig {
  int input_dim = 1;
  int output_dim = 1;
  int hidden_width = 64;
  int hidden_layers = 3;
  Activation activation = Activation::SiLU;

  void validate() const;
  // Linear maps: hidden_layers hidden layers plus a linear output head.
  int layer_count() const { return hidden_layers + 1; }
  int fan_in(int layer) const { return layer == 0 ? input_dim : hidden_width; }
  int fan_out(int layer) const { return layer == hidden_layers ? output_dim : hidden_width; }
  int param_count() const;
  bool operator==(const MlpConfig&) const = default;
};

// Flat parameter vector plus topology. Layer l occupies weights
// (fan_out x fan_in, column-major) followed by biases (fan_out).
struct MlpParams {
  MlpConfig config;
  Vec flat;

  int layer_offset(int layer) const;
  Eigen::Map<Mat> weight(int layer);
  Eigen::Map<const Mat> weight(int layer) const;
  Eigen::Map<Vec> bias(int layer);
  Eigen::Map<const Vec> bias(int layer) const;
};

// Glorot-uniform weights, zero biases, reproducible per (config, rng stream).
MlpParams init_mlp(const MlpConfig& config, Rng& rng);

// Single-point forward (convenience wrapper around the batched path).
Vec forward(const MlpParams& params, const Vec& x);

// Cached intermediates of a batched forward pass, consumed by the backward
// pass. `tz` / `t` are only populated when tangents were requested.
struct MlpCache {
  std::vector<Mat> a;   // activations, a[0] = inputs, size layer_count()+1
  std::vector<Mat> z;   // pre-activations of hidden layers
  std::vector<Mat> t;   // activation tangents, t[0] = directions
  std::vector<Mat> tz;  // pre-activation tangents of hidden layers
  bool has_tangent = false;
};

// Values of all points at once: X is input_dim x P, result output_dim x P.
Mat forward_batch(const MlpParams& params, const Mat& X, MlpCache* cache = nullptr);

// Values plus exact input-directional derivatives J(x_p) v_p per point.
void forward_tangent_batch(const MlpParams& params, const Mat& X, const Mat& V, Mat& Y, Mat& T,
                           MlpCache* cache = nullptr);

// Accumulates the parameter gradient of sum_p (dY(:,p) . Y(:,p)), and when
// dT is non-null additionally sum_p (dT(:,p) . T(:,p)), into `grad`.
void backward_batch(const MlpParams& params, const MlpCache& cache, const Mat& dY, const Mat* dT,
                    GradVector& grad);

// --- Tape bridge (reference path) --------------------------------------

// Records the network on a tape with every parameter as a leaf; inputs carry
// the tangent of direction v (pass empty v for a value-only evaluation).
// Returns one node per output component.
std::vector<int> tape_forward(Tape& tape, const MlpParams& params, const Vec& x, const Vec& v);

// Network output values and exact directional derivatives along unit v.
std::vector<Dual> eval_with_tangent(const MlpParams& params, const Vec& x, const Vec& v);

// --- Optimizer and target pair ------------------------------------------

struct AdamState {
  Vec m;
  Vec v;
  std::int64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const MlpParams& params, double lr = 1e-3);
};

void adam_step(AdamState& state, MlpParams& params, const GradVector& grad);

struct TargetPair {
  MlpParams main;
  MlpParams target;
  double tau = 0.0;

  static TargetPair make(const MlpParams& init, double tau);
};

// theta_target <- tau * theta_target + (1 - tau) * theta
void polyak_update(TargetPair& pair);

// --- Checkpoints ----------------------------------------------------------

void save_checkpoint(const MlpParams& params, const std::string& path);
MlpParams load_checkpoint(const std::string& path);

}  // namespace ipinn
