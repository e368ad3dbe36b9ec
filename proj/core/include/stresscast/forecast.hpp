#pragma once
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "stresscast/matrix.hpp"

namespace stresscast::fc {

// Index of one distribution parameter: location, scale, tail weight.
enum class ParamIndex { mu = 0, sigma = 1, nu = 2 };

std::string to_string(ParamIndex p);
ParamIndex param_index_from_string(const std::string& s);

struct StudentTParams {
  double mu = 0.0;
  double sigma = 1.0;  // > 0
  double nu = 3.0;     // > 2, so variance exists

  double param(ParamIndex p) const {
    switch (p) {
      case ParamIndex::mu: return mu;
      case ParamIndex::sigma: return sigma;
      default: return nu;
    }
  }
};

// Per-step parameters over a forecast horizon.
struct ForecastDistribution {
  std::vector<StudentTParams> steps;
  std::size_t horizon() const { return steps.size(); }
};

// Negative log density of the location-scale student-T at z, in nats.
double nll(const StudentTParams& d, double z);

// Anything that maps a history window to a distribution over the horizon and
// can differentiate a chosen output parameter with respect to the covariate
// window. The perturbation search only talks to this interface.
class ForecastModel {
 public:
  virtual ~ForecastModel() = default;

  virtual std::size_t history() const = 0;
  virtual std::size_t horizon() const = 0;
  virtual std::size_t feature_count() const = 0;

  // z_history has `history()` entries; x_window is history() x feature_count().
  virtual ForecastDistribution forecast(std::span<const double> z_history,
                                        const Matrix& x_window) const = 0;

  // d theta(p, t) / d x_window(s, i) as a history() x feature_count() matrix,
  // for horizon step t.
  virtual Matrix input_gradient(std::span<const double> z_history, const Matrix& x_window,
                                ParamIndex p, std::size_t t) const = 0;
};

}  // namespace stresscast::fc
