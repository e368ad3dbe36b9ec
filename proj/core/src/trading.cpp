#include "stresscast/trading.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "json.hpp"
#include "stresscast/errors.hpp"

namespace stresscast::tr {
namespace {

// Shortest decimal form that parses back to the same double.
std::string fmt(double v) { return nlohmann::json(v).dump(); }

}  // namespace

void StrategySpec::validate() const {
  const bool rolling =
      threshold == ThresholdKind::rolling_mean_plus_std || sizing == Sizing::kelly;
  if (rolling && rolling_window < 2) {
    throw ConfigError("strategy: rolling window must be at least 2");
  }
}

StrategySpec strategy_from_string(const std::string& name) {
  StrategySpec spec;
  std::string base = name;
  const auto comma = name.find(',');
  if (comma != std::string::npos) {
    base = name.substr(0, comma);
    const std::string sizing = name.substr(comma + 1);
    if (sizing != "kelly") {
      throw ConfigError("unknown strategy sizing '" + sizing + "' (expected kelly)");
    }
    spec.sizing = Sizing::kelly;
  }
  if (base == "t0") {
    spec.threshold = ThresholdKind::fixed_zero;
  } else if (base == "t-musigma") {
    spec.threshold = ThresholdKind::rolling_mean_plus_std;
  } else {
    throw ConfigError("unknown strategy '" + base + "' (expected t0 or t-musigma)");
  }
  return spec;
}

std::string to_string(const StrategySpec& spec) {
  std::string s = spec.threshold == ThresholdKind::fixed_zero ? "t0" : "t-musigma";
  if (spec.sizing == Sizing::kelly) s += ",kelly";
  return s;
}

double rolling_threshold(std::span<const double> past_returns) {
  const std::size_t k = past_returns.size();
  if (k < 2) throw DataError("rolling threshold needs at least 2 trailing returns");
  double mean = 0.0;
  for (double y : past_returns) mean += y;
  mean /= static_cast<double>(k);
  double ss = 0.0;
  for (double y : past_returns) ss += (y - mean) * (y - mean);
  return mean + std::sqrt(ss / static_cast<double>(k - 1));
}

double kelly_fraction(double win_rate, double gain_loss_ratio) {
  if (!(win_rate >= 0.0 && win_rate <= 1.0)) {
    throw ConfigError("kelly: win rate must lie in [0,1]");
  }
  if (!(gain_loss_ratio > 0.0)) {
    throw ConfigError("kelly: gain/loss ratio must be positive");
  }
  const double f = win_rate - (1.0 - win_rate) / gain_loss_ratio;
  return std::clamp(f, 0.0, 1.0);
}

bool decide(double forecast_return, double threshold) {
  return forecast_return >= threshold;
}

BacktestReport backtest(std::span<const double> forecast_returns,
                        std::span<const ts::PricePoint> prices,
                        const StrategySpec& spec) {
  spec.validate();
  if (forecast_returns.size() != prices.size()) {
    throw DataError("backtest: " + std::to_string(forecast_returns.size()) +
                    " forecasts vs " + std::to_string(prices.size()) + " price bars");
  }
  const std::size_t k = spec.rolling_window;
  BacktestReport report;
  report.records.reserve(prices.size());

  std::vector<double> realized;  // ground-truth y per period, for the rolling threshold
  realized.reserve(prices.size());
  std::vector<double> traded_y;  // y of past trades, for Kelly statistics
  double factor_product = 1.0;

  for (std::size_t p = 0; p < prices.size(); ++p) {
    TradeRecord rec;
    rec.timestamp = prices[p].timestamp;
    rec.forecast_return = forecast_returns[p];
    const double y = prices[p].close / prices[p].open - 1.0;
    rec.realized_return = y;

    bool can_trade = true;
    double threshold = 0.0;
    if (spec.threshold == ThresholdKind::rolling_mean_plus_std) {
      if (realized.size() < k) {
        can_trade = false;
        rec.skipped_insufficient_history = true;
      } else {
        threshold = rolling_threshold(
            std::span<const double>(realized).subspan(realized.size() - k, k));
      }
    }

    if (can_trade && decide(rec.forecast_return, threshold)) {
      double f = 1.0;
      if (spec.sizing == Sizing::kelly) {
        if (traded_y.size() < k) {
          rec.kelly_fallback_full = true;
        } else {
          const std::span<const double> tail =
              std::span<const double>(traded_y).subspan(traded_y.size() - k, k);
          std::size_t wins = 0;
          double gain_sum = 0.0;
          std::size_t gain_n = 0;
          double loss_sum = 0.0;
          std::size_t loss_n = 0;
          for (double ty : tail) {
            if (ty > 0.0) {
              ++wins;
              gain_sum += ty;
              ++gain_n;
            } else if (ty < 0.0) {
              loss_sum += -ty;
              ++loss_n;
            }
          }
          if (loss_n == 0 || gain_n == 0) {
            rec.kelly_fallback_full = true;  // ratio undefined or zero
          } else {
            const double w = static_cast<double>(wins) / static_cast<double>(k);
            const double r = (gain_sum / static_cast<double>(gain_n)) /
                             (loss_sum / static_cast<double>(loss_n));
            f = kelly_fraction(w, r);
          }
        }
      }
      rec.traded = true;
      rec.fraction = f;
      factor_product *= 1.0 + f * y;
      ++report.traded_count;
      report.traded_returns.push_back(y);
      traded_y.push_back(y);
    }

    realized.push_back(y);
    report.records.push_back(std::move(rec));
  }

  report.compounded_return_pct = (factor_product - 1.0) * 100.0;
  const double total = static_cast<double>(prices.size());
  report.percent_traded =
      prices.empty() ? 0.0 : 100.0 * static_cast<double>(report.traded_count) / total;
  if (!report.traded_returns.empty()) {
    double sum = 0.0;
    for (double y : report.traded_returns) sum += y;
    report.mean_traded_return_pct =
        100.0 * sum / static_cast<double>(report.traded_returns.size());
  }
  return report;
}

double passive_return(std::span<const ts::PricePoint> prices) {
  if (prices.empty()) throw DataError("passive return: empty price span");
  return (prices.back().close / prices.front().open - 1.0) * 100.0;
}

void write_ledger_csv(const BacktestReport& report, std::ostream& out) {
  out << "timestamp,decision,fraction,forecast,realized_return,cumulative_factor\n";
  double product = 1.0;
  for (const auto& r : report.records) {
    if (r.traded) product *= 1.0 + r.fraction * r.realized_return;
    out << r.timestamp << ',' << (r.traded ? "traded" : "skipped") << ','
        << fmt(r.fraction) << ',' << fmt(r.forecast_return) << ','
        << fmt(r.realized_return) << ',' << fmt(product) << '\n';
  }
}

}  // namespace stresscast::tr
