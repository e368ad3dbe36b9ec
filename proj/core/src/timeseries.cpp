#include "stresscast/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stresscast::ts {

std::string to_string(Frequency f) {
  return f == Frequency::daily ? "daily" : "hourly";
}

Frequency frequency_from_string(const std::string& s) {
  if (s == "daily") return Frequency::daily;
  if (s == "hourly") return Frequency::hourly;
  throw ConfigError("unknown frequency '" + s + "' (expected daily or hourly)");
}

void PriceSeries::validate() const {
  if (points.size() < 2) {
    throw DataError("price series needs at least two bars, got " +
                    std::to_string(points.size()));
  }
  for (std::size_t t = 0; t < points.size(); ++t) {
    const auto& p = points[t];
    if (!(p.open > 0.0) || !(p.close > 0.0) || !std::isfinite(p.open) ||
        !std::isfinite(p.close)) {
      throw DataError("non-positive price at " + p.timestamp);
    }
    if (t > 0 && !(points[t - 1].timestamp < p.timestamp)) {
      throw DataError("timestamps not strictly increasing at " + p.timestamp);
    }
  }
}

void FeatureMatrix::validate() const {
  if (names.size() != data.rows()) {
    throw DataError("feature name count " + std::to_string(names.size()) +
                    " does not match row count " + std::to_string(data.rows()));
  }
  if (!timestamps.empty() && timestamps.size() != data.cols()) {
    throw DataError("feature timestamp count does not match column count");
  }
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t t = 0; t < data.cols(); ++t) {
      if (!std::isfinite(data(i, t))) {
        throw DataError("non-finite value in feature '" + names[i] + "' at column " +
                        std::to_string(t));
      }
    }
  }
}

double FeatureStats::standardize(std::size_t feature, double raw) const {
  const double d = zero_variance[feature] ? 1.0 : stddev[feature];
  return (raw - mean[feature]) / d;
}

double FeatureStats::destandardize(std::size_t feature, double standardized) const {
  const double d = zero_variance[feature] ? 1.0 : stddev[feature];
  return standardized * d + mean[feature];
}

TargetSeries log_diff_transform(const PriceSeries& prices) {
  prices.validate();
  TargetSeries z;
  z.values.reserve(prices.size());
  z.timestamps.reserve(prices.size());
  for (const auto& p : prices.points) {
    z.values.push_back(std::log(p.close / p.open));
    z.timestamps.push_back(p.timestamp);
  }
  return z;
}

double target_to_return(double z) { return std::expm1(z); }

std::pair<FeatureMatrix, FeatureStats> standardize_features(const FeatureMatrix& x,
                                                            const SplitSpec& split) {
  x.validate();
  const std::size_t n = x.feature_count();
  const std::size_t t0 = split.train.begin;
  const std::size_t t1 = split.train.end;
  if (t1 <= t0 || t1 > x.length()) {
    throw DataError("training range does not fit the feature matrix");
  }
  const double count = static_cast<double>(t1 - t0);

  FeatureStats stats;
  stats.mean.resize(n);
  stats.stddev.resize(n);
  stats.raw_min.resize(n);
  stats.raw_max.resize(n);
  stats.lower.resize(n);
  stats.upper.resize(n);
  stats.zero_variance.resize(n);

  FeatureMatrix out = x;
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t t = t0; t < t1; ++t) {
      const double v = x.data(i, t);
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double mean = sum / count;
    double ss = 0.0;
    for (std::size_t t = t0; t < t1; ++t) {
      const double d = x.data(i, t) - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / count);
    const bool flat = sd <= 1e-12 * std::max(1.0, std::abs(mean));

    stats.mean[i] = mean;
    stats.stddev[i] = sd;
    stats.raw_min[i] = lo;
    stats.raw_max[i] = hi;
    stats.zero_variance[i] = flat;
    const double divisor = flat ? 1.0 : sd;
    stats.lower[i] = (lo - mean) / divisor;
    stats.upper[i] = (hi - mean) / divisor;
    for (std::size_t t = 0; t < x.length(); ++t) {
      out.data(i, t) = (x.data(i, t) - mean) / divisor;
    }
  }
  return {std::move(out), std::move(stats)};
}

FeatureMatrix lag_covariates(const FeatureMatrix& x, std::size_t lag) {
  if (lag < 1) throw ConfigError("covariate lag must be at least 1");
  if (lag >= x.length()) {
    throw DataError("covariate lag " + std::to_string(lag) +
                    " leaves no observed columns for length " +
                    std::to_string(x.length()));
  }
  FeatureMatrix out = x;
  for (std::size_t i = 0; i < x.feature_count(); ++i) {
    for (std::size_t t = x.length(); t-- > 0;) {
      out.data(i, t) = x.data(i, t >= lag ? t - lag : 0);
    }
  }
  return out;
}

WindowSet make_windows(const TargetSeries& z, const FeatureMatrix& x, const WindowSpec& w,
                       const IndexRange& range) {
  if (w.history < 1 || w.horizon < 1) {
    throw ConfigError("window history and horizon must be at least 1");
  }
  if (range.end > z.size() || range.end > x.length()) {
    throw DataError("window range extends past the series");
  }
  const std::size_t need = w.history + w.horizon;
  WindowSet set;
  if (range.length() < need) {
    set.insufficient = true;
    return set;
  }
  const std::size_t count = range.length() - need + 1;
  set.windows.reserve(count);
  const std::size_t n = x.feature_count();
  for (std::size_t r = range.begin; r + need <= range.end; ++r) {
    Window win;
    win.start = r;
    win.z_history.assign(z.values.begin() + static_cast<std::ptrdiff_t>(r),
                         z.values.begin() + static_cast<std::ptrdiff_t>(r + w.history));
    win.covariates = Matrix(w.history, n);
    for (std::size_t s = 0; s < w.history; ++s) {
      for (std::size_t i = 0; i < n; ++i) {
        win.covariates(s, i) = x.data(i, r + s);
      }
    }
    win.z_future.assign(z.values.begin() + static_cast<std::ptrdiff_t>(r + w.history),
                        z.values.begin() + static_cast<std::ptrdiff_t>(r + need));
    set.windows.push_back(std::move(win));
  }
  return set;
}

SplitSpec apply_split(std::size_t total, Frequency frequency, std::size_t min_split_len) {
  // Published partitions: 1150/40/116 of 1306 daily bars, 2550/150/190 of
  // 2890 hourly bars. Other lengths keep the proportions, rounding train and
  // valid down so the test range absorbs the remainder.
  const double train_num = frequency == Frequency::daily ? 1150.0 : 2550.0;
  const double valid_num = frequency == Frequency::daily ? 40.0 : 150.0;
  const double denom = frequency == Frequency::daily ? 1306.0 : 2890.0;

  const auto t = static_cast<double>(total);
  const auto train_len = static_cast<std::size_t>(std::floor(t * train_num / denom));
  const auto valid_len = static_cast<std::size_t>(std::floor(t * valid_num / denom));
  if (train_len + valid_len > total) {
    throw DataError("series of length " + std::to_string(total) + " cannot be split");
  }
  SplitSpec s;
  s.train = {0, train_len};
  s.valid = {train_len, train_len + valid_len};
  s.test = {train_len + valid_len, total};
  const std::size_t need = std::max<std::size_t>(min_split_len, 1);
  if (s.train.length() < need || s.valid.length() < need || s.test.length() < need) {
    throw DataError("series of length " + std::to_string(total) +
                    " is too short for a " + std::to_string(need) +
                    "-bar split at " + to_string(frequency) + " proportions");
  }
  return s;
}

}  // namespace stresscast::ts
