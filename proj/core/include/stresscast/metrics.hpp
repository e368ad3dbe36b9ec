#pragma once
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace stresscast::mt {

double rmse(std::span<const double> y, std::span<const double> y_hat);

// Mean of |y - y_hat| / |y| over nonzero truths. Zero truths are excluded and
// counted; a truth vector of only zeros leaves the value absent.
struct MapeResult {
  std::optional<double> value;
  std::size_t excluded_zeros = 0;
};
MapeResult mape(std::span<const double> y, std::span<const double> y_hat);

// Unbiased empirical CRPS: mean|S - x| - sum_{i != j} |S_i - S_j| / (2m(m-1)).
double crps_empirical(std::span<const double> samples, double x);

// Percent of sign agreements, where "up" means strictly positive.
double binary_accuracy(std::span<const double> y, std::span<const double> y_hat);

// Best constant-sign predictor: max(% positive, % non-positive) * 100.
double historical_baseline(std::span<const double> y);

struct KdeCurve {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
  bool point_mass = false;  // all inputs equal; grid holds the single value
};

// Gaussian kernel density with Silverman's bandwidth 1.06 * sd * m^(-1/5),
// sampled uniformly on [min - 3h, max + 3h].
KdeCurve return_kde(std::span<const double> returns, std::size_t grid_points = 256);

// CSV: x,density. Point-mass curves have no density curve and are rejected.
void write_kde_csv(const KdeCurve& curve, std::ostream& out);

// Scalar forecast-quality metrics for one evaluation run.
struct MetricReport {
  double rmse = 0.0;
  std::optional<double> mape;
  std::size_t mape_excluded_zeros = 0;
  double crps = 0.0;
  double binary_accuracy_pct = 0.0;
  double historical_baseline_pct = 0.0;
};

}  // namespace stresscast::mt
