#pragma once
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "stresscast/forecast.hpp"
#include "stresscast/matrix.hpp"
#include "stresscast/timeseries.hpp"

namespace stresscast::st {

enum class Direction { up = +1, down = -1 };

std::string to_string(Direction d);
Direction direction_from_string(const std::string& s);

struct PerturbationSpec {
  fc::ParamIndex param = fc::ParamIndex::mu;
  Direction direction = Direction::up;
  double epsilon = 0.01;      // per-step magnitude in standardized feature units
  std::size_t iterations = 1; // R

  void validate() const;
};

// Closed per-feature intervals the perturbed window must stay inside,
// normally the training-range min/max in standardized units.
struct FeatureBounds {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t feature_count() const { return lower.size(); }
  void validate() const;
  static FeatureBounds from_stats(const ts::FeatureStats& stats);
  static FeatureBounds uniform(std::size_t features, double lo, double hi);
};

// One applied update: iteration j, horizon step t, history step s, the chosen
// feature, and the signed delta added to the standardized value.
struct AppliedStep {
  std::size_t iteration = 0;
  std::size_t horizon_step = 0;
  std::size_t history_step = 0;
  std::size_t feature = 0;
  double delta = 0.0;
};

struct StressResult {
  Matrix x_original;  // k x N window the search started from
  Matrix x_hat;       // perturbed window, always within bounds
  fc::ForecastDistribution theta;      // forecast on x_original
  fc::ForecastDistribution theta_hat;  // forecast on x_hat
  std::vector<AppliedStep> log;
  bool terminated_early = false;  // a full iteration applied no step
};

struct PerturbationNorms {
  double l1 = 0.0;
  double linf = 0.0;
  std::size_t modified = 0;
};

// True iff lower_i <= proposed <= upper_i. The interval is closed: values
// sitting exactly on the historical extremes pass.
bool checkbounds(std::size_t feature, std::size_t history_step, double proposed,
                 const FeatureBounds& bounds);

// Gradient-guided search: for every iteration, horizon step and history step,
// recompute the input gradient on the current window, pick the feature with
// the largest gradient magnitude there (ties to the lowest index), and step it
// by direction * sign(gradient) * epsilon if that stays in bounds; otherwise
// fall back through the remaining features by decreasing magnitude. A cell
// with every candidate blocked is skipped; an iteration that applies nothing
// stops the search early.
StressResult perturb(const fc::ForecastModel& model, std::span<const double> z_history,
                     const Matrix& x_window, const PerturbationSpec& spec,
                     const FeatureBounds& bounds);

PerturbationNorms perturbation_norms(const StressResult& result);

// Applied |delta| summed per feature, from the log.
std::vector<double> perturbation_mass_by_feature(const StressResult& result);

struct SweepEntry {
  double epsilon = 0.0;
  std::vector<StressResult> results;  // one per window
};

// perturb() per window per epsilon. Epsilon 0 means the unperturbed forecast
// and produces identity results with an empty log.
std::vector<SweepEntry> sweep(const fc::ForecastModel& model,
                              const std::vector<ts::Window>& windows,
                              const PerturbationSpec& spec_template,
                              std::span<const double> epsilons,
                              const FeatureBounds& bounds);

// JSON record of spec, norms, original vs perturbed parameters per horizon
// step, and the applied-step log.
std::string to_json(const StressResult& result, const PerturbationSpec& spec);

}  // namespace stresscast::st
