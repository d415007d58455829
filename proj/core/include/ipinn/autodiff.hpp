#pragma once

#include <cmath>
#include <vector>

#include "ipinn/common.hpp"

namespace ipinn {

// A scalar value together with its directional derivative along one fixed
// input direction. Every tape node carries both channels, so expressions may
// freely mix network outputs and their input-directional derivatives, and one
// reverse sweep differentiates either channel with respect to the parameters.
struct Dual {
  double value = 0.0;
  double tangent = 0.0;
};

inline Dual dual_mul(Dual a, Dual b) {
  return {a.value * b.value, a.value * b.tangent + a.tangent * b.value};
}

using GradVector = Vec;

enum class Channel { Value, Tangent };

// Append-only computation tape. Values and forward tangents are computed
// eagerly; each node stores its local partials (as duals, i.e. the partial
// and the directional derivative of the partial), so the reverse sweep is a
// single loop of dual multiply-accumulates.
class Tape {
 public:
  explicit Tape(int param_count = 0) : param_count_(param_count) {}

  int param_count() const { return param_count_; }
  int size() const { return static_cast<int>(nodes_.size()); }

  Dual value(int node) const { return at(node).val; }

  // Leaves -------------------------------------------------------------

  int param(int index, double value) {
    if (index < 0 || index >= param_count_) throw UsageError("tape: parameter index out of range");
    return push({-1, -1, {value, 0.0}, {}, {}, index});
  }

  int constant(double c) { return push({-1, -1, {c, 0.0}, {}, {}, -1}); }

  int input(double value, double tangent) { return push({-1, -1, {value, tangent}, {}, {}, -1}); }

  // Value and tangent pass through; the reverse sweep stops here.
  int detach(int a) { return push({-1, -1, at(a).val, {}, {}, -1}); }

  // Arithmetic ----------------------------------------------------------

  int add(int a, int b) {
    const Dual x = at(a).val, y = at(b).val;
    return push({a, b, {x.value + y.value, x.tangent + y.tangent}, {1.0, 0.0}, {1.0, 0.0}, -1});
  }

  int sub(int a, int b) {
    const Dual x = at(a).val, y = at(b).val;
    return push({a, b, {x.value - y.value, x.tangent - y.tangent}, {1.0, 0.0}, {-1.0, 0.0}, -1});
  }

  int mul(int a, int b) {
    const Dual x = at(a).val, y = at(b).val;
    return push({a, b, dual_mul(x, y), y, x, -1});
  }

  int div(int a, int b) {
    const Dual x = at(a).val, y = at(b).val;
    const double iy = 1.0 / y.value;
    Dual v{x.value * iy, (x.tangent - x.value * iy * y.tangent) * iy};
    Dual da{iy, -y.tangent * iy * iy};
    Dual db{-x.value * iy * iy, (-x.tangent * y.value + 2.0 * x.value * y.tangent) * iy * iy * iy};
    return push({a, b, v, da, db, -1});
  }

  int neg(int a) {
    const Dual x = at(a).val;
    return push({a, -1, {-x.value, -x.tangent}, {-1.0, 0.0}, {}, -1});
  }

  int square(int a) {
    const Dual x = at(a).val;
    return push({a, -1, {x.value * x.value, 2.0 * x.value * x.tangent},
                 {2.0 * x.value, 2.0 * x.tangent}, {}, -1});
  }

  int sqrt_(int a) {
    const Dual x = at(a).val;
    const double s = std::sqrt(x.value);
    const double d1 = 0.5 / s;
    return push({a, -1, {s, d1 * x.tangent}, {d1, -0.25 / (s * x.value) * x.tangent}, {}, -1});
  }

  int exp_(int a) {
    const Dual x = at(a).val;
    const double e = std::exp(x.value);
    return push({a, -1, {e, e * x.tangent}, {e, e * x.tangent}, {}, -1});
  }

  int log_(int a) {
    const Dual x = at(a).val;
    const double iv = 1.0 / x.value;
    return push({a, -1, {std::log(x.value), iv * x.tangent}, {iv, -iv * iv * x.tangent}, {}, -1});
  }

  int tanh_(int a) {
    const Dual x = at(a).val;
    const double th = std::tanh(x.value);
    const double d1 = 1.0 - th * th;
    return push({a, -1, {th, d1 * x.tangent}, {d1, -2.0 * th * d1 * x.tangent}, {}, -1});
  }

  int silu(int a) {
    const Dual x = at(a).val;
    const double sg = 1.0 / (1.0 + std::exp(-x.value));
    const double sg1 = sg * (1.0 - sg);
    const double d1 = sg + x.value * sg1;
    const double d2 = 2.0 * sg1 + x.value * sg1 * (1.0 - 2.0 * sg);
    return push({a, -1, {x.value * sg, d1 * x.tangent}, {d1, d2 * x.tangent}, {}, -1});
  }

  // Subgradient at 0 is taken as 0.
  int relu(int a) {
    const Dual x = at(a).val;
    const double d1 = x.value > 0.0 ? 1.0 : 0.0;
    return push({a, -1, {d1 * x.value, d1 * x.tangent}, {d1, 0.0}, {}, -1});
  }

  // Ties pick the first operand.
  int min_(int a, int b) {
    const Dual x = at(a).val, y = at(b).val;
    const bool first = x.value <= y.value;
    return push({a, b, first ? x : y, {first ? 1.0 : 0.0, 0.0}, {first ? 0.0 : 1.0, 0.0}, -1});
  }

  // Reverse sweep -------------------------------------------------------

  // Gradient of the chosen channel of `output` with respect to all
  // parameters. Parameters not on a path to the output get exactly 0.
  GradVector backward(int output, Channel channel = Channel::Value) const {
    if (output < 0 || output >= size()) throw UsageError("tape: output node is not on this tape");
    // Adjoints are stored as duals (d out / d tangent_i, d out / d value_i);
    // chain-rule propagation is then plain dual multiplication against the
    // stored local partials.
    std::vector<Dual> adj(nodes_.size());
    adj[output] = channel == Channel::Value ? Dual{0.0, 1.0} : Dual{1.0, 0.0};
    GradVector grad = GradVector::Zero(param_count_);
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
      const Node& n = nodes_[i];
      const Dual a = adj[i];
      if (a.value == 0.0 && a.tangent == 0.0) continue;
      if (n.param >= 0) {
        grad[n.param] += a.tangent;  // d out / d value of the parameter leaf
        continue;
      }
      if (n.a >= 0) {
        const Dual c = dual_mul(n.da, a);
        adj[n.a].value += c.value;
        adj[n.a].tangent += c.tangent;
      }
      if (n.b >= 0) {
        const Dual c = dual_mul(n.db, a);
        adj[n.b].value += c.value;
        adj[n.b].tangent += c.tangent;
      }
    }
    return grad;
  }

 private:
  struct Node {
    int a;
    int b;
    Dual val;
    Dual da;
    Dual db;
    int param;
  };

  const Node& at(int i) const {
    if (i < 0 || i >= size()) throw UsageError("tape: node index out of range");
    return nodes_[i];
  }

  int push(Node n) {
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }

  std::vector<Node> nodes_;
  int param_count_;
};

}  // namespace ipinn
