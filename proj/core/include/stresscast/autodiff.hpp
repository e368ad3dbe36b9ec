#pragma once
#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "stresscast/errors.hpp"

namespace stresscast::ad {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives
// and has not been cleared.
class Value {
 public:
  Value() = default;
  double value() const;
  Tape* tape() const { return tape_; }
  std::int32_t id() const { return id_; }

 private:
  friend class Tape;
  Value(Tape* tape, std::int32_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::int32_t id_ = -1;
};

// Adjoints of one reverse sweep, indexed by node.
class GradientMap {
 public:
  // Zero for nodes the output does not depend on (including nodes recorded
  // after the output).
  double at(const Value& v) const {
    assert(v.tape() != nullptr);
    const auto id = static_cast<std::size_t>(v.id());
    return id < adjoint_.size() ? adjoint_[id] : 0.0;
  }

 private:
  friend class Tape;
  std::vector<double> adjoint_;
};

// Records a scalar computation as it runs and replays it backwards for
// gradients. One writer per tape; independent tapes are independent.
class Tape {
 public:
  Value var(double v) { return record("var", v, -1, -1, 0.0, 0.0); }
  Value constant(double v) { return record("const", v, -1, -1, 0.0, 0.0); }

  std::vector<Value> vars(std::span<const double> vs) {
    std::vector<Value> out;
    out.reserve(vs.size());
    for (double v : vs) out.push_back(var(v));
    return out;
  }

  std::size_t size() const { return nodes_.size(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }
  void clear() { nodes_.clear(); }

  double value(const Value& v) const {
    assert(v.tape() == this && v.id() >= 0);
    return nodes_[static_cast<std::size_t>(v.id())].val;
  }

  // Reverse sweep from a scalar output. Does not mutate the tape; repeated
  // calls give identical results.
  GradientMap backward(const Value& output) const;

  Value add(Value a, Value b) { return record("add", val(a) + val(b), a.id_, b.id_, 1.0, 1.0); }
  Value sub(Value a, Value b) { return record("sub", val(a) - val(b), a.id_, b.id_, 1.0, -1.0); }
  Value mul(Value a, Value b) {
    const double va = val(a), vb = val(b);
    return record("mul", va * vb, a.id_, b.id_, vb, va);
  }
  Value div(Value a, Value b) {
    const double vb = val(b);
    if (vb == 0.0) throw NumericError("autodiff: div by zero");
    const double va = val(a);
    return record("div", va / vb, a.id_, b.id_, 1.0 / vb, -va / (vb * vb));
  }
  Value neg(Value a) { return record("neg", -val(a), a.id_, -1, -1.0, 0.0); }
  Value exp(Value a) {
    const double e = std::exp(val(a));
    return record("exp", e, a.id_, -1, e, 0.0);
  }
  Value log(Value a) {
    const double va = val(a);
    if (!(va > 0.0)) throw NumericError("autodiff: log of non-positive argument");
    return record("log", std::log(va), a.id_, -1, 1.0 / va, 0.0);
  }
  Value tanh(Value a) {
    const double t = std::tanh(val(a));
    return record("tanh", t, a.id_, -1, 1.0 - t * t, 0.0);
  }
  Value sigmoid(Value a) {
    const double s = sigmoid_fwd(val(a));
    return record("sigmoid", s, a.id_, -1, s * (1.0 - s), 0.0);
  }
  Value softplus(Value a) {
    const double x = val(a);
    return record("softplus", softplus_fwd(x), a.id_, -1, sigmoid_fwd(x), 0.0);
  }
  Value square(Value a) {
    const double va = val(a);
    return record("square", va * va, a.id_, -1, 2.0 * va, 0.0);
  }
  Value log_gamma(Value a);

  static double sigmoid_fwd(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  }
  static double softplus_fwd(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  }

 private:
  struct Node {
    double val;
    double da;  // local partial w.r.t. predecessor a
    double db;  // local partial w.r.t. predecessor b
    std::int32_t a;
    std::int32_t b;
  };

  double val(const Value& v) const {
    assert(v.tape_ == this);
    return nodes_[static_cast<std::size_t>(v.id_)].val;
  }

  Value record(const char* op, double v, std::int32_t a, std::int32_t b, double da, double db) {
    if (!std::isfinite(v))
      throw NumericError(std::string("autodiff: non-finite value from '") + op + "'");
    nodes_.push_back(Node{v, da, db, a, b});
    return Value(this, static_cast<std::int32_t>(nodes_.size()) - 1);
  }

  std::vector<Node> nodes_;
};

inline double Value::value() const {
  assert(tape_ != nullptr);
  return tape_->value(*this);
}

inline Value operator+(Value a, Value b) { return a.tape()->add(a, b); }
inline Value operator-(Value a, Value b) { return a.tape()->sub(a, b); }
inline Value operator*(Value a, Value b) { return a.tape()->mul(a, b); }
inline Value operator/(Value a, Value b) { return a.tape()->div(a, b); }
inline Value operator-(Value a) { return a.tape()->neg(a); }
inline Value operator+(Value a, double b) { return a + a.tape()->constant(b); }
inline Value operator+(double a, Value b) { return b.tape()->constant(a) + b; }
inline Value operator-(Value a, double b) { return a - a.tape()->constant(b); }
inline Value operator-(double a, Value b) { return b.tape()->constant(a) - b; }
inline Value operator*(Value a, double b) { return a * a.tape()->constant(b); }
inline Value operator*(double a, Value b) { return b.tape()->constant(a) * b; }
inline Value operator/(Value a, double b) { return a / a.tape()->constant(b); }
inline Value operator/(double a, Value b) { return b.tape()->constant(a) / b; }
inline Value exp(Value a) { return a.tape()->exp(a); }
inline Value log(Value a) { return a.tape()->log(a); }
inline Value tanh(Value a) { return a.tape()->tanh(a); }
inline Value sigmoid(Value a) { return a.tape()->sigmoid(a); }
inline Value softplus(Value a) { return a.tape()->softplus(a); }
inline Value square(Value a) { return a.tape()->square(a); }
inline Value log_gamma(Value a) { return a.tape()->log_gamma(a); }

// Digamma for x > 0: recurrence shift into the asymptotic regime, then the
// Bernoulli-number series. Absolute error below 1e-10.
double digamma(double x);

// Central finite differences, (f(x+h e_i) - f(x-h e_i)) / 2h per coordinate.
// Independent of the tape; used as a gradient oracle.
std::vector<double> finite_diff_gradient(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, double h);

}  // namespace stresscast::ad
