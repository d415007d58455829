#include "ipinn/nn.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace ipinn {

Activation activation_from_string(const std::string& s) {
  if (s == "silu") return Activation::SiLU;
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::ReLU;
  throw ConfigError("unknown activation '" + s + "' (expected silu|tanh|relu)");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::SiLU: return "silu";
    case Activation::Tanh: return "tanh";
    case Activation::ReLU: return "relu";
  }
  return "?";
}

void MlpConfig::validate() const {
  if (input_dim < 1 || output_dim < 1 || hidden_width < 1 || hidden_layers < 1)
    throw ConfigError("mlp config: all dimensions must be >= 1");
}

int MlpConfig::param_count() const {
  int n = 0;
  for (int l = 0; l < layer_count(); ++l) n += (fan_in(l) + 1) * fan_out(l);
  return n;
}

int MlpParams::layer_offset(int layer) const {
  int off = 0;
  for (int l = 0; l < layer; ++l) off += (config.fan_in(l) + 1) * config.fan_out(l);
  return off;
}

Eigen::Map<Mat> MlpParams::weight(int layer) {
  return {flat.data() + layer_offset(layer), config.fan_out(layer), config.fan_in(layer)};
}
Eigen::Map<const Mat> MlpParams::weight(int layer) const {
  return {flat.data() + layer_offset(layer), config.fan_out(layer), config.fan_in(layer)};
}
Eigen::Map<Vec> MlpParams::bias(int layer) {
  return {flat.data() + layer_offset(layer) + config.fan_in(layer) * config.fan_out(layer),
          config.fan_out(layer)};
}
Eigen::Map<const Vec> MlpParams::bias(int layer) const {
  return {flat.data() + layer_offset(layer) + config.fan_in(layer) * config.fan_out(layer),
          config.fan_out(layer)};
}

MlpParams init_mlp(const MlpConfig& config, Rng& rng) {
  config.validate();
  MlpParams p{config, Vec::Zero(config.param_count())};
  for (int l = 0; l < config.layer_count(); ++l) {
    const double bound = std::sqrt(6.0 / (config.fan_in(l) + config.fan_out(l)));
    auto W = p.weight(l);
    for (int j = 0; j < W.cols(); ++j)
      for (int i = 0; i < W.rows(); ++i) W(i, j) = rng.uniform(-bound, bound);
    // biases stay zero
  }
  return p;
}

namespace {

// Elementwise activation value and first/second derivatives.
void act_eval(Activation act, const Mat& z, Mat& a) {
  switch (act) {
    case Activation::Tanh: a = z.array().tanh(); break;
    case Activation::ReLU: a = z.cwiseMax(0.0); break;
    case Activation::SiLU: a = z.array() / (1.0 + (-z.array()).exp()); break;
  }
}

void act_d1(Activation act, const Mat& z, Mat& d1) {
  switch (act) {
    case Activation::Tanh: {
      Eigen::ArrayXXd th = z.array().tanh();
      d1 = 1.0 - th.square();
      break;
    }
    case Activation::ReLU: d1 = (z.array() > 0.0).cast<double>(); break;
    case Activation::SiLU: {
      Eigen::ArrayXXd sg = 1.0 / (1.0 + (-z.array()).exp());
      d1 = sg * (1.0 + z.array() * (1.0 - sg));
      break;
    }
  }
}

void act_d2(Activation act, const Mat& z, Mat& d2) {
  switch (act) {
    case Activation::Tanh: {
      Eigen::ArrayXXd th = z.array().tanh();
      d2 = -2.0 * th * (1.0 - th.square());
      break;
    }
    case Activation::ReLU: d2 = Mat::Zero(z.rows(), z.cols()); break;
    case Activation::SiLU: {
      Eigen::ArrayXXd sg = 1.0 / (1.0 + (-z.array()).exp());
      Eigen::ArrayXXd sg1 = sg * (1.0 - sg);
      d2 = sg1 * (2.0 + z.array() * (1.0 - 2.0 * sg));
      break;
    }
  }
}

}  // namespace

Mat forward_batch(const MlpParams& params, const Mat& X, MlpCache* cache) {
  const MlpConfig& c = params.config;
  if (X.rows() != c.input_dim) throw ConfigError("forward_batch: input dimension mismatch");
  const int L = c.layer_count();
  Mat a = X;
  if (cache) {
    cache->a.assign(1, X);
    cache->z.clear();
    cache->t.clear();
    cache->tz.clear();
    cache->has_tangent = false;
  }
  Mat z, an;
  for (int l = 0; l < L - 1; ++l) {
    z.noalias() = params.weight(l) * a;
    z.colwise() += params.bias(l);
    act_eval(c.activation, z, an);
    if (cache) {
      cache->z.push_back(z);
      cache->a.push_back(an);
    }
    a.swap(an);
  }
  Mat y;
  y.noalias() = params.weight(L - 1) * a;
  y.colwise() += params.bias(L - 1);
  if (cache) cache->a.push_back(y);
  return y;
}

void forward_tangent_batch(const MlpParams& params, const Mat& X, const Mat& V, Mat& Y, Mat& T,
                           MlpCache* cache) {
  const MlpConfig& c = params.config;
  if (X.rows() != c.input_dim || V.rows() != c.input_dim || X.cols() != V.cols())
    throw ConfigError("forward_tangent_batch: input dimension mismatch");
  const int L = c.layer_count();
  Mat a = X, t = V;
  if (cache) {
    cache->a.assign(1, X);
    cache->t.assign(1, V);
    cache->z.clear();
    cache->tz.clear();
    cache->has_tangent = true;
  }
  Mat z, tz, an, d1;
  for (int l = 0; l < L - 1; ++l) {
    z.noalias() = params.weight(l) * a;
    z.colwise() += params.bias(l);
    tz.noalias() = params.weight(l) * t;
    act_eval(c.activation, z, an);
    act_d1(c.activation, z, d1);
    if (cache) {
      cache->z.push_back(z);
      cache->tz.push_back(tz);
      cache->a.push_back(an);
    }
    a.swap(an);
    t = d1.cwiseProduct(tz);
    if (cache) cache->t.push_back(t);
  }
  Y.noalias() = params.weight(L - 1) * a;
  Y.colwise() += params.bias(L - 1);
  T.noalias() = params.weight(L - 1) * t;
}

void backward_batch(const MlpParams& params, const MlpCache& cache, const Mat& dY, const Mat* dT,
                    GradVector& grad) {
  const MlpConfig& c = params.config;
  const int L = c.layer_count();
  if (grad.size() != params.flat.size()) throw UsageError("backward_batch: gradient size mismatch");
  if (dT && !cache.has_tangent) throw UsageError("backward_batch: cache has no tangent channel");

  MlpParams& mp = const_cast<MlpParams&>(params);  // maps only, no mutation
  Mat abar = dY;
  Mat tbar;
  if (dT) tbar = *dT;

  const int out_off = mp.layer_offset(L - 1);
  {
    Eigen::Map<Mat> gW(grad.data() + out_off, c.fan_out(L - 1), c.fan_in(L - 1));
    Eigen::Map<Vec> gb(grad.data() + out_off + c.fan_in(L - 1) * c.fan_out(L - 1), c.fan_out(L - 1));
    gW.noalias() += abar * cache.a[L - 1].transpose();
    if (dT) gW.noalias() += tbar * cache.t[L - 1].transpose();
    gb.noalias() += abar.rowwise().sum();
  }
  Mat prev_abar, prev_tbar, zbar, tzbar, d1, d2;
  prev_abar.noalias() = mp.weight(L - 1).transpose() * abar;
  if (dT) prev_tbar.noalias() = mp.weight(L - 1).transpose() * tbar;
  abar.swap(prev_abar);
  if (dT) tbar.swap(prev_tbar);

  for (int l = L - 2; l >= 0; --l) {
    act_d1(c.activation, cache.z[l], d1);
    zbar = d1.cwiseProduct(abar);
    if (dT) {
      act_d2(c.activation, cache.z[l], d2);
      zbar += d2.cwiseProduct(cache.tz[l]).cwiseProduct(tbar);
      tzbar = d1.cwiseProduct(tbar);
    }
    const int off = mp.layer_offset(l);
    Eigen::Map<Mat> gW(grad.data() + off, c.fan_out(l), c.fan_in(l));
    Eigen::Map<Vec> gb(grad.data() + off + c.fan_in(l) * c.fan_out(l), c.fan_out(l));
    gW.noalias() += zbar * cache.a[l].transpose();
    if (dT) gW.noalias() += tzbar * cache.t[l].transpose();
    gb.noalias() += zbar.rowwise().sum();
    if (l > 0) {
      prev_abar.noalias() = mp.weight(l).transpose() * zbar;
      abar.swap(prev_abar);
      if (dT) {
        prev_tbar.noalias() = mp.weight(l).transpose() * tzbar;
        tbar.swap(prev_tbar);
      }
    }
  }
}

Vec forward(const MlpParams& params, const Vec& x) {
  return forward_batch(params, x).col(0);
}

std::vector<int> tape_forward(Tape& tape, const MlpParams& params, const Vec& x, const Vec& v) {
  const MlpConfig& c = params.config;
  if (x.size() != c.input_dim) throw ConfigError("tape_forward: input dimension mismatch");
  if (v.size() != 0 && v.size() != c.input_dim)
    throw ConfigError("tape_forward: direction dimension mismatch");
  std::vector<int> act(c.input_dim);
  for (int i = 0; i < c.input_dim; ++i)
    act[i] = tape.input(x[i], v.size() ? v[i] : 0.0);
  MlpParams& mp = const_cast<MlpParams&>(params);
  for (int l = 0; l < c.layer_count(); ++l) {
    const int off = mp.layer_offset(l);
    const auto W = mp.weight(l);
    std::vector<int> next(c.fan_out(l));
    for (int i = 0; i < c.fan_out(l); ++i) {
      int s = tape.param(off + W.size() + i, params.bias(l)[i]);  // bias leaf
      for (int j = 0; j < c.fan_in(l); ++j) {
        int w = tape.param(off + j * c.fan_out(l) + i, W(i, j));
        s = tape.add(s, tape.mul(w, act[j]));
      }
      if (l < c.layer_count() - 1) {
        switch (c.activation) {
          case Activation::SiLU: s = tape.silu(s); break;
          case Activation::Tanh: s = tape.tanh_(s); break;
          case Activation::ReLU: s = tape.relu(s); break;
        }
      }
      next[i] = s;
    }
    act.swap(next);
  }
  return act;
}

std::vector<Dual> eval_with_tangent(const MlpParams& params, const Vec& x, const Vec& v) {
  Tape tape(params.config.param_count());
  auto outs = tape_forward(tape, params, x, v);
  std::vector<Dual> res(outs.size());
  for (size_t i = 0; i < outs.size(); ++i) res[i] = tape.value(outs[i]);
  return res;
}

AdamState AdamState::for_params(const MlpParams& params, double lr) {
  AdamState s;
  s.m = Vec::Zero(params.flat.size());
  s.v = Vec::Zero(params.flat.size());
  s.lr = lr;
  return s;
}

void adam_step(AdamState& state, MlpParams& params, const GradVector& grad) {
  if (grad.size() != params.flat.size()) throw UsageError("adam_step: shape mismatch");
  if (!grad.allFinite())
    throw NumericError("adam_step: non-finite gradient (NaN/Inf) at step " +
                       std::to_string(state.step + 1));
  state.step += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v.array().matrix() +
            (1.0 - state.beta2) * grad.array().square().matrix();
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  params.flat.array() -=
      state.lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + state.eps);
}

TargetPair TargetPair::make(const MlpParams& init, double tau) {
  if (tau < 0.0 || tau > 1.0) throw ConfigError("polyak tau must be in [0,1]");
  return {init, init, tau};
}

void polyak_update(TargetPair& pair) {
  if (pair.main.config != pair.target.config)
    throw ConfigError("polyak_update: main/target topology mismatch");
  pair.target.flat = pair.tau * pair.target.flat + (1.0 - pair.tau) * pair.main.flat;
}

void save_checkpoint(const MlpParams& params, const std::string& path) {
  nlohmann::json j;
  j["format"] = "ipinn-mlp";
  j["version"] = 1;
  j["config"] = {{"input_dim", params.config.input_dim},
                 {"output_dim", params.config.output_dim},
                 {"hidden_width", params.config.hidden_width},
                 {"hidden_layers", params.config.hidden_layers},
                 {"activation", to_string(params.config.activation)}};
  j["params"] = std::vector<double>(params.flat.data(), params.flat.data() + params.flat.size());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open checkpoint file for writing: " + path);
  out << j.dump(2) << "\n";
}

MlpParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint file: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  if (j.value("format", "") != "ipinn-mlp") throw ConfigError("not an ipinn-mlp checkpoint: " + path);
  MlpConfig c;
  c.input_dim = j["config"]["input_dim"].get<int>();
  c.output_dim = j["config"]["output_dim"].get<int>();
  c.hidden_width = j["config"]["hidden_width"].get<int>();
  c.hidden_layers = j["config"]["hidden_layers"].get<int>();
  c.activation = activation_from_string(j["config"]["activation"].get<std::string>());
  c.validate();
  auto vals = j["params"].get<std::vector<double>>();
  if (static_cast<int>(vals.size()) != c.param_count())
    throw ConfigError("checkpoint parameter count does not match its config");
  MlpParams p{c, Eigen::Map<const Vec>(vals.data(), static_cast<Eigen::Index>(vals.size()))};
  return p;
}

}  // namespace ipinn
