#include "stresscast/data_io.hpp"

#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "stresscast/errors.hpp"

namespace stresscast::io {
namespace {

std::string fmt(double v) { return nlohmann::json(v).dump(); }

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_number(const std::string& field, std::size_t row, const std::string& column,
                    const std::string& file) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || field.empty()) {
    throw DataError(file + " row " + std::to_string(row) + ": column '" + column +
                    "' is not numeric: '" + field + "'");
  }
  if (!std::isfinite(v)) {
    throw DataError(file + " row " + std::to_string(row) + ": column '" + column +
                    "' is not finite");
  }
  return v;
}

bool digits_at(const std::string& s, std::initializer_list<std::size_t> idx) {
  for (std::size_t i : idx) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  }
  return true;
}

void check_date(const std::string& d, ts::Frequency freq, std::size_t row,
                const std::string& file) {
  bool ok = false;
  if (freq == ts::Frequency::daily) {
    ok = d.size() == 10 && digits_at(d, {0, 1, 2, 3, 5, 6, 8, 9}) && d[4] == '-' &&
         d[7] == '-';
  } else {
    ok = d.size() == 16 && digits_at(d, {0, 1, 2, 3, 5, 6, 8, 9, 11, 12, 14, 15}) &&
         d[4] == '-' && d[7] == '-' && d[10] == 'T' && d[13] == ':';
  }
  if (!ok) {
    throw DataError(file + " row " + std::to_string(row) + ": date '" + d +
                    "' does not match the " + ts::to_string(freq) + " format");
  }
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

}  // namespace

ts::PriceSeries load_price_csv(const std::string& path, ts::Frequency frequency) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw DataError(path + ": empty file");
  if (split_line(lines[0]) != std::vector<std::string>{"date", "open", "close"}) {
    throw DataError(path + ": expected header 'date,open,close', got '" + lines[0] + "'");
  }
  ts::PriceSeries series;
  series.frequency = frequency;
  series.points.reserve(lines.size() - 1);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::size_t row = r + 1;  // 1-based, counting the header
    const auto fields = split_line(lines[r]);
    if (fields.size() != 3) {
      throw DataError(path + " row " + std::to_string(row) + ": expected 3 columns, got " +
                      std::to_string(fields.size()));
    }
    check_date(fields[0], frequency, row, path);
    if (!series.points.empty() && series.points.back().timestamp == fields[0]) {
      throw DataError(path + " row " + std::to_string(row) + ": duplicate date '" +
                      fields[0] + "'");
    }
    ts::PricePoint p;
    p.timestamp = fields[0];
    p.open = parse_number(fields[1], row, "open", path);
    p.close = parse_number(fields[2], row, "close", path);
    series.points.push_back(std::move(p));
  }
  series.validate();
  return series;
}

ts::FeatureMatrix load_feature_csv(const std::string& path, ts::Frequency frequency) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw DataError(path + ": empty file");
  const auto header = split_line(lines[0]);
  if (header.size() < 2 || header[0] != "date") {
    throw DataError(path + ": expected header 'date,<name>,...', got '" + lines[0] + "'");
  }
  const std::size_t n = header.size() - 1;
  for (std::size_t i = 1; i < header.size(); ++i) {
    if (header[i].empty()) {
      throw DataError(path + ": empty feature name in column " + std::to_string(i + 1));
    }
    for (std::size_t j = 1; j < i; ++j) {
      if (header[j] == header[i]) {
        throw DataError(path + ": duplicate feature name '" + header[i] + "'");
      }
    }
  }
  const std::size_t t_len = lines.size() - 1;
  ts::FeatureMatrix fm;
  fm.names.assign(header.begin() + 1, header.end());
  fm.data = Matrix(n, t_len);
  fm.timestamps.reserve(t_len);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::size_t row = r + 1;
    const auto fields = split_line(lines[r]);
    if (fields.size() != header.size()) {
      throw DataError(path + " row " + std::to_string(row) + ": expected " +
                      std::to_string(header.size()) + " columns, got " +
                      std::to_string(fields.size()));
    }
    check_date(fields[0], frequency, row, path);
    if (!fm.timestamps.empty() && fm.timestamps.back() >= fields[0]) {
      throw DataError(path + " row " + std::to_string(row) +
                      ": dates not strictly increasing at '" + fields[0] + "'");
    }
    fm.timestamps.push_back(fields[0]);
    for (std::size_t i = 0; i < n; ++i) {
      fm.data(i, r - 1) = parse_number(fields[1 + i], row, fm.names[i], path);
    }
  }
  fm.validate();
  return fm;
}

std::pair<ts::PriceSeries, ts::FeatureMatrix> load_dataset(const std::string& price_csv,
                                                           const std::string& feature_csv,
                                                           ts::Frequency frequency) {
  ts::PriceSeries prices = load_price_csv(price_csv, frequency);
  ts::FeatureMatrix features = load_feature_csv(feature_csv, frequency);
  if (prices.size() != features.length()) {
    throw DataError("dataset: " + std::to_string(prices.size()) + " price rows vs " +
                    std::to_string(features.length()) + " feature rows");
  }
  for (std::size_t t = 0; t < prices.size(); ++t) {
    if (prices.points[t].timestamp != features.timestamps[t]) {
      throw DataError("dataset: date mismatch at row " + std::to_string(t + 2) +
                      ": price '" + prices.points[t].timestamp + "' vs feature '" +
                      features.timestamps[t] + "'");
    }
  }
  return {std::move(prices), std::move(features)};
}

void write_price_csv(const ts::PriceSeries& prices, std::ostream& out) {
  out << "date,open,close\n";
  for (const auto& p : prices.points) {
    out << p.timestamp << ',' << fmt(p.open) << ',' << fmt(p.close) << '\n';
  }
}

void write_feature_csv(const ts::FeatureMatrix& features, std::ostream& out) {
  out << "date";
  for (const auto& name : features.names) out << ',' << name;
  out << '\n';
  for (std::size_t t = 0; t < features.length(); ++t) {
    out << features.timestamps[t];
    for (std::size_t i = 0; i < features.feature_count(); ++i) {
      out << ',' << fmt(features.data(i, t));
    }
    out << '\n';
  }
}

void SyntheticSpec::validate() const {
  if (length < 10) throw ConfigError("synthetic: length must be at least 10");
  if (features < 1) throw ConfigError("synthetic: needs at least 1 feature");
  if (!(noise_scale > 0.0)) throw ConfigError("synthetic: noise scale must be positive");
  if (!(base_price > 0.0)) throw ConfigError("synthetic: base price must be positive");
  if (!std::isfinite(coupling)) throw ConfigError("synthetic: coupling must be finite");
}

namespace {

std::string synthetic_timestamp(std::size_t t, ts::Frequency freq) {
  using namespace std::chrono;
  char buf[24];
  if (freq == ts::Frequency::daily) {
    const sys_days day = sys_days(year{2020} / January / 6) + days(t);
    const year_month_day ymd(day);
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  } else {
    const sys_days day = sys_days(year{2020} / January / 6) + days(t / 24);
    const year_month_day ymd(day);
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02u:00", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<unsigned>(t % 24));
  }
  return buf;
}

}  // namespace

std::pair<ts::PriceSeries, ts::FeatureMatrix> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const std::size_t t_len = spec.length;
  const std::size_t n = spec.features;
  ts::FeatureMatrix fm;
  fm.data = Matrix(n, t_len);
  fm.names.reserve(n);
  fm.timestamps.reserve(t_len);
  for (std::size_t i = 0; i < n; ++i) fm.names.push_back("f" + std::to_string(i + 1));
  for (std::size_t t = 0; t < t_len; ++t) {
    fm.timestamps.push_back(synthetic_timestamp(t, spec.frequency));
  }

  // AR(1) with unit stationary variance per feature.
  const double rho = 0.5;
  const double innovation = std::sqrt(1.0 - rho * rho);
  for (std::size_t i = 0; i < n; ++i) {
    fm.data(i, 0) = gauss(rng);
    for (std::size_t t = 1; t < t_len; ++t) {
      fm.data(i, t) = rho * fm.data(i, t - 1) + innovation * gauss(rng);
    }
  }

  std::vector<double> z(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    const double lagged = t == 0 ? 0.0 : fm.data(0, t - 1);
    z[t] = spec.coupling * lagged + spec.noise_scale * gauss(rng);
  }

  ts::PriceSeries prices;
  prices.frequency = spec.frequency;
  prices.points.reserve(t_len);
  double open = spec.base_price;
  for (std::size_t t = 0; t < t_len; ++t) {
    ts::PricePoint p;
    p.timestamp = fm.timestamps[t];
    p.open = open;
    p.close = open * std::exp(z[t]);
    open = p.close;
    prices.points.push_back(std::move(p));
  }
  prices.validate();
  fm.validate();
  return {std::move(prices), std::move(fm)};
}

}  // namespace stresscast::io
