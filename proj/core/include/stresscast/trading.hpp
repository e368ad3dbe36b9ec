#pragma once
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "stresscast/timeseries.hpp"

namespace stresscast::tr {

enum class ThresholdKind { fixed_zero, rolling_mean_plus_std };
enum class Sizing { full, kelly };

struct StrategySpec {
  ThresholdKind threshold = ThresholdKind::fixed_zero;
  Sizing sizing = Sizing::full;
  std::size_t rolling_window = 20;  // trailing k for the threshold and Kelly stats

  void validate() const;
};

// "t0" or "t-musigma", optionally with ",kelly". The rolling window length
// comes from configuration, not the name.
StrategySpec strategy_from_string(const std::string& name);
std::string to_string(const StrategySpec& spec);

struct TradeRecord {
  std::string timestamp;
  bool traded = false;
  double fraction = 0.0;         // invested fraction, 0 when skipped
  double forecast_return = 0.0;  // forecast mean in return space
  double realized_return = 0.0;  // y = close/open - 1
  bool skipped_insufficient_history = false;  // rolling threshold had < k returns
  bool kelly_fallback_full = false;           // Kelly stats unavailable, sized full
};

struct BacktestReport {
  std::vector<TradeRecord> records;
  double compounded_return_pct = 0.0;
  double percent_traded = 0.0;
  double mean_traded_return_pct = 0.0;
  std::size_t traded_count = 0;
  std::vector<double> traded_returns;  // realized y of traded periods
};

// Sample mean plus sample standard deviation (denominator k-1) of the
// trailing returns.
double rolling_threshold(std::span<const double> past_returns);

// f = W - (1-W)/R, clamped to [0,1].
double kelly_fraction(double win_rate, double gain_loss_ratio);

// Long-only: trade iff the forecast reaches the threshold (closed inequality).
bool decide(double forecast_return, double threshold);

// Replays the strategy over aligned forecasts and price bars. Each traded
// period contributes a factor (1 + f*y); the report compounds them.
BacktestReport backtest(std::span<const double> forecast_returns,
                        std::span<const ts::PricePoint> prices, const StrategySpec& spec);

// Buy the first open, sell the last close, in percent.
double passive_return(std::span<const ts::PricePoint> prices);

// CSV: timestamp, decision, fraction, forecast, realized_return, cumulative_factor
void write_ledger_csv(const BacktestReport& report, std::ostream& out);

}  // namespace stresscast::tr
