#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stresscast/data_io.hpp"
#include "stresscast/forecaster.hpp"
#include "stresscast/metrics.hpp"
#include "stresscast/stress.hpp"
#include "stresscast/timeseries.hpp"
#include "stresscast/trading.hpp"

namespace stresscast::pl {

struct StressTarget {
  fc::ParamIndex param = fc::ParamIndex::mu;
  st::Direction direction = st::Direction::up;
};

struct StressConfig {
  double epsilon = 0.03;       // per-step size for the per-target runs
  std::size_t iterations = 1;  // R
  std::vector<StressTarget> targets;  // empty = all three parameters, both directions
  std::vector<double> sweep_epsilons = {0.0, 0.01, 0.03, 0.1};
  std::size_t max_windows = 0;  // cap on perturbed test windows, 0 = all
};

// One master seed; every stochastic component derives its own stream from it.
struct RunConfig {
  std::uint64_t seed = 42;
  ts::Frequency frequency = ts::Frequency::daily;
  std::string out_dir = "out";

  std::string price_csv;    // both set -> load files; both empty -> synthetic
  std::string feature_csv;
  io::SyntheticSpec synthetic;
  bool use_synthetic = true;

  ts::WindowSpec window{30, 5};
  std::size_t covariate_lag = 1;
  fc::TrainConfig train;
  std::string checkpoint_path;  // optional: load instead of training
  // An explicitly empty list disables trading; the config key replaces this
  // default wholesale.
  std::vector<tr::StrategySpec> strategies{
      {}, {tr::ThresholdKind::rolling_mean_plus_std}};
  StressConfig stress;
  std::size_t crps_samples = 200;
  std::size_t kde_grid = 256;

  void validate() const;
};

// JSON with a schema_version field; unknown keys are ignored, bad values name
// the key. Missing sections keep the defaults above.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt);

struct Dataset {
  ts::PriceSeries prices;
  ts::FeatureMatrix features;  // lagged, then standardized on the train range
  ts::TargetSeries target;
  ts::FeatureStats stats;
  ts::SplitSpec split;
  ts::WindowSet train_windows;
  ts::WindowSet valid_windows;
  ts::WindowSet test_windows;
};

Dataset prepare(const RunConfig& cfg);

// Step-0 forecasts of a window set, aligned with the bars they predict. The
// windows are kept (covariates possibly perturbed) so distributional metrics
// can resample from the same inputs.
struct ForecastSet {
  std::vector<std::size_t> periods;  // global bar index each forecast targets
  std::vector<ts::Window> windows;
  std::vector<fc::ForecastDistribution> dists;
  std::vector<double> mu;           // step-0 location, log-return units
  std::vector<double> mean_return;  // same, mapped to return space
  std::vector<double> truth_z;
  std::vector<ts::PricePoint> bars;
};

ForecastSet forecast_windows(const fc::ForecastModel& model, const Dataset& data,
                             const std::vector<ts::Window>& windows);

struct StrategyOutcome {
  tr::StrategySpec spec;
  std::string name;
  tr::BacktestReport report;
  mt::KdeCurve kde;
  bool kde_available = false;
};

struct StressRow {
  st::PerturbationSpec spec;
  std::vector<st::StressResult> results;  // one per perturbed window
  std::vector<std::size_t> window_starts;
  mt::MetricReport metrics;  // against truth, with perturbed forecasts
  std::vector<StrategyOutcome> strategies;
  double mean_l1 = 0.0;
  double max_linf = 0.0;
  double mean_modified = 0.0;
  std::size_t terminated_early_count = 0;
};

struct SweepPoint {
  double epsilon = 0.0;
  double mean_l1 = 0.0;
  tr::BacktestReport report;  // zero-threshold full-sizing strategy on perturbed forecasts
  mt::KdeCurve kde;
  bool kde_available = false;
};

struct RunOutcome {
  Dataset data;
  std::optional<fc::RnnForecaster> model;
  fc::TrainLog train_log;
  bool trained = false;  // false when a checkpoint was loaded
  ForecastSet forecasts;
  mt::MetricReport metrics;
  double passive_pct = 0.0;
  std::vector<StrategyOutcome> strategies;
  std::vector<StressRow> stress_rows;
  std::vector<SweepPoint> sweep;
  std::vector<std::string> artifacts;  // relative paths written under out_dir
};

std::pair<fc::RnnForecaster, fc::TrainLog> train_model(const RunConfig& cfg,
                                                       const Dataset& data);

mt::MetricReport compute_metrics(const RunConfig& cfg, const fc::RnnForecaster& model,
                                 const Dataset& data, const ForecastSet& fs);

std::vector<StrategyOutcome> backtest_strategies(const RunConfig& cfg,
                                                 const ForecastSet& fs);

StressRow stress_target(const RunConfig& cfg, const fc::RnnForecaster& model,
                        const Dataset& data, const StressTarget& target);

std::vector<SweepPoint> stress_sweep(const RunConfig& cfg, const fc::RnnForecaster& model,
                                     const Dataset& data);

// All stages, optionally without the perturbation work. Does not write files.
RunOutcome execute(const RunConfig& cfg, bool with_stress);

// execute() plus artifact emission under cfg.out_dir. Any stage failure
// aborts with the stage name and removes files written so far.
RunOutcome run_pipeline(const RunConfig& cfg);

}  // namespace stresscast::pl
