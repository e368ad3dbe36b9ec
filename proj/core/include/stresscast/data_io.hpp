#pragma once
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>

#include "stresscast/timeseries.hpp"

namespace stresscast::io {

// price CSV: header `date,open,close`. feature CSV: header `date,<name>,...`.
// Dates are ISO-8601, `YYYY-MM-DD` daily or `YYYY-MM-DDTHH:00` hourly.
ts::PriceSeries load_price_csv(const std::string& path, ts::Frequency frequency);
ts::FeatureMatrix load_feature_csv(const std::string& path, ts::Frequency frequency);

// Loads both files and checks row-by-row date alignment.
std::pair<ts::PriceSeries, ts::FeatureMatrix> load_dataset(const std::string& price_csv,
                                                           const std::string& feature_csv,
                                                           ts::Frequency frequency);

void write_price_csv(const ts::PriceSeries& prices, std::ostream& out);
void write_feature_csv(const ts::FeatureMatrix& features, std::ostream& out);

struct SyntheticSpec {
  std::size_t length = 1306;
  std::size_t features = 13;
  double coupling = 0.03;     // weight of feature 1's lag in the target
  double noise_scale = 0.01;  // std of the Gaussian noise added to the target
  double base_price = 100.0;
  ts::Frequency frequency = ts::Frequency::daily;
  std::uint64_t seed = 0;

  void validate() const;
};

// Features are unit-variance AR(1) noise; the target couples to feature 1's
// previous value: z_t = coupling * x1_{t-1} + noise. Prices accumulate the
// target drift so that ln(close/open) round-trips to z exactly.
std::pair<ts::PriceSeries, ts::FeatureMatrix> generate_synthetic(const SyntheticSpec& spec);

}  // namespace stresscast::io
