#include "stresscast/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace stresscast::ad {

GradientMap Tape::backward(const Value& output) const {
  if (output.tape() != this || output.id() < 0)
    throw std::invalid_argument("backward: output not on this tape");
  GradientMap g;
  g.adjoint_.assign(nodes_.size(), 0.0);
  g.adjoint_[static_cast<std::size_t>(output.id())] = 1.0;
  for (std::int32_t i = static_cast<std::int32_t>(nodes_.size()) - 1; i >= 0; --i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    const double adj = g.adjoint_[static_cast<std::size_t>(i)];
    if (adj == 0.0) continue;
    if (n.a >= 0) {
      if (n.a >= i) throw std::logic_error("backward: tape is not topologically ordered");
      g.adjoint_[static_cast<std::size_t>(n.a)] += adj * n.da;
    }
    if (n.b >= 0) {
      if (n.b >= i) throw std::logic_error("backward: tape is not topologically ordered");
      g.adjoint_[static_cast<std::size_t>(n.b)] += adj * n.db;
    }
  }
  return g;
}

Value Tape::log_gamma(Value a) {
  const double x = val(a);
  if (!(x > 0.0)) throw NumericError("autodiff: log_gamma of non-positive argument");
  return record("log_gamma", std::lgamma(x), a.id_, -1, digamma(x), 0.0);
}

double digamma(double x) {
  if (!(x > 0.0)) throw NumericError("digamma: non-positive argument");
  double acc = 0.0;
  while (x < 6.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // psi(x) ~ ln x - 1/2x - sum B_2n / (2n x^2n)
  const double series =
      inv2 * (1.0 / 12.0 -
              inv2 * (1.0 / 120.0 -
                      inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
  return acc + std::log(x) - 0.5 * inv - series;
}

std::vector<double> finite_diff_gradient(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_gradient: h must be positive");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double up = f(probe);
    probe[i] = saved - h;
    const double down = f(probe);
    probe[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace stresscast::ad
