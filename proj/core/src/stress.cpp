#include "stresscast/stress.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "stresscast/errors.hpp"

namespace stresscast::st {

std::string to_string(Direction d) { return d == Direction::up ? "up" : "down"; }

Direction direction_from_string(const std::string& s) {
  if (s == "up") return Direction::up;
  if (s == "down") return Direction::down;
  throw ConfigError("unknown direction '" + s + "' (expected up or down)");
}

void PerturbationSpec::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("perturbation epsilon must be positive");
  if (iterations < 1) throw ConfigError("perturbation iterations must be at least 1");
}

void FeatureBounds::validate() const {
  if (lower.size() != upper.size()) {
    throw ConfigError("feature bounds: lower/upper length mismatch");
  }
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!(lower[i] <= upper[i])) {
      throw ConfigError("feature bounds: lower > upper for feature " + std::to_string(i));
    }
  }
}

FeatureBounds FeatureBounds::from_stats(const ts::FeatureStats& stats) {
  FeatureBounds b;
  b.lower = stats.lower;
  b.upper = stats.upper;
  b.validate();
  return b;
}

FeatureBounds FeatureBounds::uniform(std::size_t features, double lo, double hi) {
  FeatureBounds b;
  b.lower.assign(features, lo);
  b.upper.assign(features, hi);
  b.validate();
  return b;
}

bool checkbounds(std::size_t feature, std::size_t history_step, double proposed,
                 const FeatureBounds& bounds) {
  (void)history_step;  // bounds are per feature; the step index is part of the call site
  return bounds.lower.at(feature) <= proposed && proposed <= bounds.upper.at(feature);
}

StressResult perturb(const fc::ForecastModel& model, std::span<const double> z_history,
                     const Matrix& x_window, const PerturbationSpec& spec,
                     const FeatureBounds& bounds) {
  spec.validate();
  bounds.validate();
  const std::size_t k = model.history();
  const std::size_t n = model.feature_count();
  if (x_window.rows() != k || x_window.cols() != n || z_history.size() != k) {
    throw DataError("perturb: window shape does not match the model");
  }
  if (bounds.feature_count() != n) {
    throw DataError("perturb: bounds cover " + std::to_string(bounds.feature_count()) +
                    " features, model has " + std::to_string(n));
  }

  StressResult res;
  res.x_original = x_window;
  res.theta = model.forecast(z_history, x_window);
  Matrix xh = x_window;

  const double dir = spec.direction == Direction::up ? 1.0 : -1.0;
  std::vector<std::size_t> order(n);
  for (std::size_t j = 0; j < spec.iterations; ++j) {
    std::size_t applied_in_iteration = 0;
    for (std::size_t t = 0; t < model.horizon(); ++t) {
      for (std::size_t s = 0; s < k; ++s) {
        const Matrix g = model.input_gradient(z_history, xh, spec.param, t);
        for (std::size_t i = 0; i < n; ++i) {
          if (!std::isfinite(g(s, i))) {
            throw NumericError("perturb: non-finite gradient at iteration " +
                               std::to_string(j) + ", horizon step " + std::to_string(t) +
                               ", history step " + std::to_string(s) + ", feature " +
                               std::to_string(i));
          }
        }
        // Candidates by decreasing |gradient|, lowest index on ties; a zero
        // gradient cannot pick a step direction and is never a candidate.
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          return std::abs(g(s, a)) > std::abs(g(s, b));
        });
        for (std::size_t i : order) {
          const double gi = g(s, i);
          if (gi == 0.0) break;  // the rest are zeros too
          const double delta = dir * (gi > 0.0 ? 1.0 : -1.0) * spec.epsilon;
          const double proposed = xh(s, i) + delta;
          if (checkbounds(i, s, proposed, bounds)) {
            xh(s, i) = proposed;
            res.log.push_back({j, t, s, i, delta});
            ++applied_in_iteration;
            break;
          }
        }
      }
    }
    if (applied_in_iteration == 0) {
      res.terminated_early = true;
      break;
    }
  }

  res.x_hat = std::move(xh);
  res.theta_hat = model.forecast(z_history, res.x_hat);
  return res;
}

PerturbationNorms perturbation_norms(const StressResult& result) {
  PerturbationNorms norms;
  const auto& a = result.x_original.data();
  const auto& b = result.x_hat.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(b[i] - a[i]);
    norms.l1 += d;
    norms.linf = std::max(norms.linf, d);
    if (d != 0.0) ++norms.modified;
  }
  return norms;
}

std::vector<double> perturbation_mass_by_feature(const StressResult& result) {
  std::vector<double> mass(result.x_original.cols(), 0.0);
  for (const auto& step : result.log) mass[step.feature] += std::abs(step.delta);
  return mass;
}

std::vector<SweepEntry> sweep(const fc::ForecastModel& model,
                              const std::vector<ts::Window>& windows,
                              const PerturbationSpec& spec_template,
                              std::span<const double> epsilons,
                              const FeatureBounds& bounds) {
  if (epsilons.empty()) throw ConfigError("sweep: epsilon list must be non-empty");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (epsilons[i] < 0.0) throw ConfigError("sweep: epsilon must be non-negative");
    if (i > 0 && epsilons[i] <= epsilons[i - 1]) {
      throw ConfigError("sweep: epsilon list must be strictly ascending");
    }
  }
  std::vector<SweepEntry> out;
  out.reserve(epsilons.size());
  for (const double eps : epsilons) {
    SweepEntry entry;
    entry.epsilon = eps;
    entry.results.reserve(windows.size());
    for (const auto& w : windows) {
      if (eps == 0.0) {
        StressResult r;
        r.x_original = w.covariates;
        r.x_hat = w.covariates;
        r.theta = model.forecast(w.z_history, w.covariates);
        r.theta_hat = r.theta;
        entry.results.push_back(std::move(r));
      } else {
        PerturbationSpec spec = spec_template;
        spec.epsilon = eps;
        entry.results.push_back(perturb(model, w.z_history, w.covariates, spec, bounds));
      }
    }
    out.push_back(std::move(entry));
  }
  return out;
}

std::string to_json(const StressResult& result, const PerturbationSpec& spec) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["kind"] = "stress-report";
  j["spec"] = {{"param", fc::to_string(spec.param)},
               {"direction", to_string(spec.direction)},
               {"epsilon", spec.epsilon},
               {"iterations", spec.iterations}};
  const PerturbationNorms norms = perturbation_norms(result);
  j["norms"] = {{"l1", norms.l1}, {"linf", norms.linf}, {"modified_entries", norms.modified}};
  j["terminated_early"] = result.terminated_early;
  auto steps = [](const fc::ForecastDistribution& d) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : d.steps) {
      arr.push_back({{"mu", s.mu}, {"sigma", s.sigma}, {"nu", s.nu}});
    }
    return arr;
  };
  j["theta"] = steps(result.theta);
  j["theta_hat"] = steps(result.theta_hat);
  nlohmann::json log = nlohmann::json::array();
  for (const auto& s : result.log) {
    log.push_back({{"iteration", s.iteration},
                   {"horizon_step", s.horizon_step},
                   {"history_step", s.history_step},
                   {"feature", s.feature},
                   {"delta", s.delta}});
  }
  j["log"] = log;
  return j.dump(2) + "\n";
}

}  // namespace stresscast::st
