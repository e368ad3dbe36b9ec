#include "stresscast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "json.hpp"
#include "stresscast/errors.hpp"

namespace stresscast::mt {
namespace {

void check_pair(std::span<const double> y, std::span<const double> y_hat) {
  if (y.empty()) throw DataError("metric: empty input");
  if (y.size() != y_hat.size()) {
    throw DataError("metric: length mismatch (" + std::to_string(y.size()) + " vs " +
                    std::to_string(y_hat.size()) + ")");
  }
}

std::string fmt(double v) { return nlohmann::json(v).dump(); }

constexpr double kPi = 3.14159265358979323846;

}  // namespace

double rmse(std::span<const double> y, std::span<const double> y_hat) {
  check_pair(y, y_hat);
  double ss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - y_hat[i];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(y.size()));
}

MapeResult mape(std::span<const double> y, std::span<const double> y_hat) {
  check_pair(y, y_hat);
  MapeResult res;
  double acc = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0) {
      ++res.excluded_zeros;
      continue;
    }
    acc += std::abs(y[i] - y_hat[i]) / std::abs(y[i]);
    ++used;
  }
  if (used > 0) res.value = acc / static_cast<double>(used);
  return res;
}

double crps_empirical(std::span<const double> samples, double x) {
  const std::size_t m = samples.size();
  if (m < 2) throw DataError("crps: needs at least 2 samples");
  double term1 = 0.0;
  for (double s : samples) term1 += std::abs(s - x);
  term1 /= static_cast<double>(m);

  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  // sum over ordered pairs |S_i - S_j| via the sorted identity
  // sum_{i<j}(s_j - s_i) = sum_j (2j - m + 1) s_j.
  double pair_sum = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    pair_sum += (2.0 * static_cast<double>(j) - static_cast<double>(m) + 1.0) * sorted[j];
  }
  const double md = static_cast<double>(m);
  return term1 - pair_sum / (md * (md - 1.0));
}

double binary_accuracy(std::span<const double> y, std::span<const double> y_hat) {
  check_pair(y, y_hat);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if ((y[i] > 0.0) == (y_hat[i] > 0.0)) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(y.size());
}

double historical_baseline(std::span<const double> y) {
  if (y.empty()) throw DataError("metric: empty input");
  std::size_t positive = 0;
  for (double v : y) {
    if (v > 0.0) ++positive;
  }
  const double frac = static_cast<double>(positive) / static_cast<double>(y.size());
  return 100.0 * std::max(frac, 1.0 - frac);
}

KdeCurve return_kde(std::span<const double> returns, std::size_t grid_points) {
  const std::size_t m = returns.size();
  if (m < 2) throw DataError("kde: needs at least 2 values");
  if (grid_points < 2) throw ConfigError("kde: needs at least 2 grid points");

  double mean = 0.0;
  for (double v : returns) mean += v;
  mean /= static_cast<double>(m);
  double ss = 0.0;
  for (double v : returns) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(m - 1));

  KdeCurve curve;
  if (sd == 0.0) {
    curve.point_mass = true;
    curve.grid.push_back(returns[0]);
    curve.density.push_back(0.0);
    return curve;
  }
  const double h = 1.06 * sd * std::pow(static_cast<double>(m), -0.2);
  curve.bandwidth = h;
  const auto [lo_it, hi_it] = std::minmax_element(returns.begin(), returns.end());
  const double lo = *lo_it - 3.0 * h;
  const double hi = *hi_it + 3.0 * h;
  const double dx = (hi - lo) / static_cast<double>(grid_points - 1);
  const double norm = 1.0 / (static_cast<double>(m) * h * std::sqrt(2.0 * kPi));
  curve.grid.resize(grid_points);
  curve.density.resize(grid_points);
  for (std::size_t g = 0; g < grid_points; ++g) {
    const double x = lo + dx * static_cast<double>(g);
    double acc = 0.0;
    for (double v : returns) {
      const double u = (x - v) / h;
      acc += std::exp(-0.5 * u * u);
    }
    curve.grid[g] = x;
    curve.density[g] = norm * acc;
  }
  return curve;
}

void write_kde_csv(const KdeCurve& curve, std::ostream& out) {
  if (curve.point_mass) {
    throw ConfigError("kde: point-mass distribution has no density curve");
  }
  out << "x,density\n";
  for (std::size_t g = 0; g < curve.grid.size(); ++g) {
    out << fmt(curve.grid[g]) << ',' << fmt(curve.density[g]) << '\n';
  }
}

}  // namespace stresscast::mt
