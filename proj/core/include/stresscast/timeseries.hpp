#pragma once
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "stresscast/errors.hpp"
#include "stresscast/matrix.hpp"

namespace stresscast::ts {

enum class Frequency { daily, hourly };

std::string to_string(Frequency f);
Frequency frequency_from_string(const std::string& s);

// One bar: quoted price at market open and market close.
struct PricePoint {
  std::string timestamp;  // ISO-8601 date, or date-hour "YYYY-MM-DDTHH:00"
  double open = 0.0;
  double close = 0.0;
};

struct PriceSeries {
  std::vector<PricePoint> points;
  Frequency frequency = Frequency::daily;

  std::size_t size() const { return points.size(); }
  // Throws DataError unless timestamps strictly increase, prices are
  // positive, and there are at least two points.
  void validate() const;
};

// Log difference of close over open per bar, the stationary target series.
struct TargetSeries {
  std::vector<double> values;
  std::vector<std::string> timestamps;

  std::size_t size() const { return values.size(); }
};

// Covariates, one row per feature, one column per bar.
struct FeatureMatrix {
  std::vector<std::string> names;
  Matrix data;  // N x T
  std::vector<std::string> timestamps;

  std::size_t feature_count() const { return data.rows(); }
  std::size_t length() const { return data.cols(); }
  void validate() const;
};

// Per-feature statistics from the training range only. Bounds are the raw
// historical min/max expressed in standardized units, which is what the
// perturbation bound check consumes.
struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // population std over the training range
  std::vector<double> raw_min;
  std::vector<double> raw_max;
  std::vector<double> lower;  // (raw_min - mean) / divisor
  std::vector<double> upper;  // (raw_max - mean) / divisor
  std::vector<bool> zero_variance;

  std::size_t feature_count() const { return mean.size(); }
  double standardize(std::size_t feature, double raw) const;
  double destandardize(std::size_t feature, double standardized) const;
};

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  std::size_t length() const { return end - begin; }
};

struct SplitSpec {
  IndexRange train;
  IndexRange valid;
  IndexRange test;
};

struct WindowSpec {
  std::size_t history = 1;  // k past observations fed to the model
  std::size_t horizon = 1;  // forecast length in steps
};

// One training/forecast example. Covariates are history-step major:
// covariates(s, i) is feature i at history step s.
struct Window {
  std::vector<double> z_history;   // length k
  Matrix covariates;               // k x N
  std::vector<double> z_future;    // length horizon
  std::size_t start = 0;           // global index of the first history element
};

struct WindowSet {
  std::vector<Window> windows;
  bool insufficient = false;  // set when the range cannot fit a single window
};

// z_t = ln(close_t / open_t). Rejects non-positive prices naming the bar.
TargetSeries log_diff_transform(const PriceSeries& prices);

// e^z - 1, the simple-return fraction a log-return corresponds to.
double target_to_return(double z);

// Standardize each feature with mean/std estimated on the training range
// only. Zero-variance features are centered but not scaled, and flagged.
std::pair<FeatureMatrix, FeatureStats> standardize_features(const FeatureMatrix& x,
                                                            const SplitSpec& split);

// Shift columns right by `lag`, repeating the earliest column in front, so
// the covariates aligned with bar t carry no information from bar t or later.
FeatureMatrix lag_covariates(const FeatureMatrix& x, std::size_t lag);

// All stride-1 windows that fit inside `range`. Windows never index outside
// the range.
WindowSet make_windows(const TargetSeries& z, const FeatureMatrix& x, const WindowSpec& w,
                       const IndexRange& range);

// Train/valid/test ranges: the published absolute splits when the length
// matches them, otherwise the same proportions with train and valid rounded
// down. Each range must end up with at least `min_split_len` elements.
SplitSpec apply_split(std::size_t total, Frequency frequency, std::size_t min_split_len = 1);

}  // namespace stresscast::ts
