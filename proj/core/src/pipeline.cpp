#include "stresscast/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "stresscast/errors.hpp"
#include "stresscast/report.hpp"

namespace stresscast::pl {
namespace {

using nlohmann::json;

template <class F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(name) + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(std::string(name) + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(std::string(name) + ": " + e.what());
  }
}

template <class T>
T field(const json& j, const char* key, T def) {
  if (!j.contains(key)) return def;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config: bad value for '") + key + "'");
  }
}

std::vector<StressTarget> default_targets() {
  std::vector<StressTarget> t;
  for (const auto p : {fc::ParamIndex::mu, fc::ParamIndex::sigma, fc::ParamIndex::nu}) {
    for (const auto d : {st::Direction::up, st::Direction::down}) t.push_back({p, d});
  }
  return t;
}

RunConfig normalized(RunConfig cfg) {
  if (cfg.stress.targets.empty()) cfg.stress.targets = default_targets();
  cfg.synthetic.seed = cfg.seed;
  cfg.synthetic.frequency = cfg.frequency;
  cfg.train.seed = derive_seed(cfg.seed, 1);
  cfg.validate();
  return cfg;
}

std::vector<ts::Window> stress_windows(const RunConfig& cfg, const Dataset& data) {
  const auto& all = data.test_windows.windows;
  std::size_t count = all.size();
  if (cfg.stress.max_windows > 0) count = std::min(count, cfg.stress.max_windows);
  return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count)};
}

ForecastSet assemble(const Dataset& data, std::vector<ts::Window> windows,
                     std::vector<fc::ForecastDistribution> dists) {
  ForecastSet fs;
  const std::size_t count = windows.size();
  fs.periods.reserve(count);
  fs.mu.reserve(count);
  fs.mean_return.reserve(count);
  fs.truth_z.reserve(count);
  fs.bars.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t period = windows[i].start + windows[i].z_history.size();
    fs.periods.push_back(period);
    const double mu0 = dists[i].steps.at(0).mu;
    fs.mu.push_back(mu0);
    fs.mean_return.push_back(ts::target_to_return(mu0));
    fs.truth_z.push_back(data.target.values.at(period));
    fs.bars.push_back(data.prices.points.at(period));
  }
  fs.windows = std::move(windows);
  fs.dists = std::move(dists);
  return fs;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt) {
  // splitmix64 over master advanced by salt steps' worth of increment
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void RunConfig::validate() const {
  if (out_dir.empty()) throw ConfigError("config: out_dir must not be empty");
  if (window.history < 1 || window.horizon < 1) {
    throw ConfigError("config: window history and horizon must be at least 1");
  }
  if (covariate_lag < 1) throw ConfigError("config: covariate_lag must be at least 1");
  if (use_synthetic) {
    synthetic.validate();
  } else if (price_csv.empty() || feature_csv.empty()) {
    throw ConfigError("config: price_csv and feature_csv are both required for file input");
  }
  train.validate();
  for (const auto& s : strategies) s.validate();
  if (!(stress.epsilon > 0.0)) throw ConfigError("config: stress epsilon must be positive");
  if (stress.iterations < 1) throw ConfigError("config: stress iterations must be at least 1");
  for (std::size_t i = 0; i < stress.sweep_epsilons.size(); ++i) {
    if (stress.sweep_epsilons[i] < 0.0) {
      throw ConfigError("config: sweep epsilon must be non-negative");
    }
    if (i > 0 && stress.sweep_epsilons[i] <= stress.sweep_epsilons[i - 1]) {
      throw ConfigError("config: sweep_epsilons must be strictly ascending");
    }
  }
  if (crps_samples < 2) throw ConfigError("config: crps_samples must be at least 2");
  if (kde_grid < 2) throw ConfigError("config: kde_grid must be at least 2");
}

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  if (field<int>(j, "schema_version", 0) != 1) {
    throw ConfigError("config: schema_version must be 1");
  }
  RunConfig cfg;
  cfg.seed = field<std::uint64_t>(j, "seed", cfg.seed);
  cfg.frequency = ts::frequency_from_string(
      field<std::string>(j, "frequency", ts::to_string(cfg.frequency)));
  cfg.out_dir = field<std::string>(j, "out_dir", cfg.out_dir);

  if (j.contains("data")) {
    const json& d = j.at("data");
    if (!d.is_object()) throw ConfigError("config: 'data' must be an object");
    const bool has_files = d.contains("price_csv") || d.contains("feature_csv");
    const bool has_synth = d.contains("synthetic");
    if (has_files && has_synth) {
      throw ConfigError("config: choose either CSV paths or a synthetic spec, not both");
    }
    if (has_files) {
      cfg.use_synthetic = false;
      cfg.price_csv = field<std::string>(d, "price_csv", "");
      cfg.feature_csv = field<std::string>(d, "feature_csv", "");
    } else if (has_synth) {
      const json& s = d.at("synthetic");
      if (!s.is_object()) throw ConfigError("config: 'synthetic' must be an object");
      cfg.synthetic.length = field<std::size_t>(s, "length", cfg.synthetic.length);
      cfg.synthetic.features = field<std::size_t>(s, "features", cfg.synthetic.features);
      cfg.synthetic.coupling = field<double>(s, "coupling", cfg.synthetic.coupling);
      cfg.synthetic.noise_scale =
          field<double>(s, "noise_scale", cfg.synthetic.noise_scale);
      cfg.synthetic.base_price = field<double>(s, "base_price", cfg.synthetic.base_price);
    }
  }

  if (j.contains("window")) {
    const json& w = j.at("window");
    cfg.window.history = field<std::size_t>(w, "history", cfg.window.history);
    cfg.window.horizon = field<std::size_t>(w, "horizon", cfg.window.horizon);
  }
  cfg.covariate_lag = field<std::size_t>(j, "covariate_lag", cfg.covariate_lag);

  if (j.contains("train")) {
    const json& t = j.at("train");
    cfg.train.hidden = field<std::size_t>(t, "hidden", cfg.train.hidden);
    cfg.train.learning_rate = field<double>(t, "learning_rate", cfg.train.learning_rate);
    cfg.train.epochs = field<std::size_t>(t, "epochs", cfg.train.epochs);
    cfg.train.patience = field<std::size_t>(t, "patience", cfg.train.patience);
    cfg.train.weight_decay = field<double>(t, "weight_decay", cfg.train.weight_decay);
    cfg.train.dropout = field<double>(t, "dropout", cfg.train.dropout);
  }
  cfg.checkpoint_path = field<std::string>(j, "checkpoint_path", "");

  if (j.contains("strategies")) {
    const json& arr = j.at("strategies");
    if (!arr.is_array()) throw ConfigError("config: 'strategies' must be an array");
    cfg.strategies.clear();
    for (const json& e : arr) {
      tr::StrategySpec spec;
      if (e.is_string()) {
        spec = tr::strategy_from_string(e.get<std::string>());
      } else if (e.is_object()) {
        spec = tr::strategy_from_string(field<std::string>(e, "name", "t0"));
        spec.rolling_window =
            field<std::size_t>(e, "rolling_window", spec.rolling_window);
      } else {
        throw ConfigError("config: strategy entries must be names or objects");
      }
      cfg.strategies.push_back(spec);
    }
  }

  if (j.contains("stress")) {
    const json& s = j.at("stress");
    cfg.stress.epsilon = field<double>(s, "epsilon", cfg.stress.epsilon);
    cfg.stress.iterations = field<std::size_t>(s, "iterations", cfg.stress.iterations);
    cfg.stress.max_windows = field<std::size_t>(s, "max_windows", cfg.stress.max_windows);
    cfg.stress.sweep_epsilons =
        field<std::vector<double>>(s, "sweep_epsilons", cfg.stress.sweep_epsilons);
    if (s.contains("targets")) {
      const json& arr = s.at("targets");
      if (!arr.is_array()) throw ConfigError("config: 'targets' must be an array");
      for (const json& e : arr) {
        StressTarget t;
        t.param = fc::param_index_from_string(field<std::string>(e, "param", "mu"));
        t.direction = st::direction_from_string(field<std::string>(e, "direction", "up"));
        cfg.stress.targets.push_back(t);
      }
    }
  }

  cfg.crps_samples = field<std::size_t>(j, "crps_samples", cfg.crps_samples);
  cfg.kde_grid = field<std::size_t>(j, "kde_grid", cfg.kde_grid);
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

Dataset prepare(const RunConfig& cfg) {
  cfg.validate();
  Dataset d;
  ts::FeatureMatrix raw;
  if (cfg.use_synthetic) {
    io::SyntheticSpec s = cfg.synthetic;
    s.seed = cfg.seed;
    s.frequency = cfg.frequency;
    std::tie(d.prices, raw) = io::generate_synthetic(s);
  } else {
    std::tie(d.prices, raw) = io::load_dataset(cfg.price_csv, cfg.feature_csv, cfg.frequency);
  }
  d.target = ts::log_diff_transform(d.prices);
  const std::size_t min_len = cfg.window.history + cfg.window.horizon;
  d.split = ts::apply_split(d.prices.size(), cfg.frequency, min_len);
  const ts::FeatureMatrix lagged = ts::lag_covariates(raw, cfg.covariate_lag);
  std::tie(d.features, d.stats) = ts::standardize_features(lagged, d.split);
  d.train_windows = ts::make_windows(d.target, d.features, cfg.window, d.split.train);
  d.valid_windows = ts::make_windows(d.target, d.features, cfg.window, d.split.valid);
  d.test_windows = ts::make_windows(d.target, d.features, cfg.window, d.split.test);
  if (d.train_windows.windows.empty() || d.valid_windows.windows.empty() ||
      d.test_windows.windows.empty()) {
    throw DataError("prepare: a split is too short to fit one window");
  }
  return d;
}

std::pair<fc::RnnForecaster, fc::TrainLog> train_model(const RunConfig& cfg,
                                                       const Dataset& data) {
  if (!cfg.checkpoint_path.empty()) {
    fc::RnnForecaster model = fc::RnnForecaster::load(cfg.checkpoint_path);
    if (model.history() != cfg.window.history || model.horizon() != cfg.window.horizon ||
        model.feature_count() != data.features.feature_count()) {
      throw DataError("checkpoint '" + cfg.checkpoint_path +
                      "' does not match the configured window and feature shapes");
    }
    return {std::move(model), fc::TrainLog{}};
  }
  fc::TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, 1);
  auto [params, log] = fc::train(data.train_windows.windows, data.valid_windows.windows, tc);
  return {fc::RnnForecaster(std::move(params), cfg.window, tc.seed), std::move(log)};
}

ForecastSet forecast_windows(const fc::ForecastModel& model, const Dataset& data,
                             const std::vector<ts::Window>& windows) {
  std::vector<fc::ForecastDistribution> dists;
  dists.reserve(windows.size());
  for (const auto& w : windows) dists.push_back(model.forecast(w.z_history, w.covariates));
  return assemble(data, windows, std::move(dists));
}

mt::MetricReport compute_metrics(const RunConfig& cfg, const fc::RnnForecaster& model,
                                 const Dataset& data, const ForecastSet& fs) {
  (void)data;
  if (fs.windows.empty()) throw DataError("metrics: empty forecast set");
  mt::MetricReport rep;
  rep.rmse = mt::rmse(fs.truth_z, fs.mu);
  const mt::MapeResult mp = mt::mape(fs.truth_z, fs.mu);
  rep.mape = mp.value;
  rep.mape_excluded_zeros = mp.excluded_zeros;
  rep.binary_accuracy_pct = mt::binary_accuracy(fs.truth_z, fs.mu);
  rep.historical_baseline_pct = mt::historical_baseline(fs.truth_z);

  double crps_acc = 0.0;
  std::vector<double> first_step(cfg.crps_samples);
  for (std::size_t i = 0; i < fs.windows.size(); ++i) {
    const Matrix paths = model.sample_paths(fs.windows[i].z_history,
                                            fs.windows[i].covariates, cfg.crps_samples,
                                            derive_seed(cfg.seed, 1000 + i));
    for (std::size_t s = 0; s < cfg.crps_samples; ++s) first_step[s] = paths(s, 0);
    crps_acc += mt::crps_empirical(first_step, fs.truth_z[i]);
  }
  rep.crps = crps_acc / static_cast<double>(fs.windows.size());
  return rep;
}

std::vector<StrategyOutcome> backtest_strategies(const RunConfig& cfg,
                                                 const ForecastSet& fs) {
  std::vector<StrategyOutcome> out;
  out.reserve(cfg.strategies.size());
  for (const auto& spec : cfg.strategies) {
    StrategyOutcome o;
    o.spec = spec;
    o.name = tr::to_string(spec);
    o.report = tr::backtest(fs.mean_return, fs.bars, spec);
    if (o.report.traded_returns.size() >= 2) {
      o.kde = mt::return_kde(o.report.traded_returns, cfg.kde_grid);
      o.kde_available = !o.kde.point_mass;
    }
    out.push_back(std::move(o));
  }
  return out;
}

StressRow stress_target(const RunConfig& cfg, const fc::RnnForecaster& model,
                        const Dataset& data, const StressTarget& target) {
  StressRow row;
  row.spec = {target.param, target.direction, cfg.stress.epsilon, cfg.stress.iterations};
  const st::FeatureBounds bounds = st::FeatureBounds::from_stats(data.stats);
  std::vector<ts::Window> windows = stress_windows(cfg, data);

  std::vector<fc::ForecastDistribution> dists;
  dists.reserve(windows.size());
  for (auto& w : windows) {
    st::StressResult res = st::perturb(model, w.z_history, w.covariates, row.spec, bounds);
    const st::PerturbationNorms norms = st::perturbation_norms(res);
    row.mean_l1 += norms.l1;
    row.max_linf = std::max(row.max_linf, norms.linf);
    row.mean_modified += static_cast<double>(norms.modified);
    if (res.terminated_early) ++row.terminated_early_count;
    row.window_starts.push_back(w.start);
    dists.push_back(res.theta_hat);
    w.covariates = res.x_hat;  // the perturbed inputs feed the re-evaluation
    row.results.push_back(std::move(res));
  }
  const double count = static_cast<double>(windows.size());
  row.mean_l1 /= count;
  row.mean_modified /= count;

  const ForecastSet perturbed = assemble(data, std::move(windows), std::move(dists));
  row.metrics = compute_metrics(cfg, model, data, perturbed);
  for (const auto& spec : cfg.strategies) {
    StrategyOutcome o;
    o.spec = spec;
    o.name = tr::to_string(spec);
    o.report = tr::backtest(perturbed.mean_return, perturbed.bars, spec);
    row.strategies.push_back(std::move(o));
  }
  return row;
}

std::vector<SweepPoint> stress_sweep(const RunConfig& cfg, const fc::RnnForecaster& model,
                                     const Dataset& data) {
  std::vector<SweepPoint> out;
  if (cfg.stress.sweep_epsilons.empty()) return out;
  const std::vector<ts::Window> windows = stress_windows(cfg, data);
  st::PerturbationSpec tmpl;
  tmpl.param = fc::ParamIndex::mu;
  tmpl.direction = st::Direction::up;
  tmpl.iterations = cfg.stress.iterations;
  const st::FeatureBounds bounds = st::FeatureBounds::from_stats(data.stats);
  const auto entries = st::sweep(model, windows, tmpl, cfg.stress.sweep_epsilons, bounds);

  const tr::StrategySpec spec{};  // zero threshold, full sizing
  for (const auto& entry : entries) {
    SweepPoint pt;
    pt.epsilon = entry.epsilon;
    std::vector<ts::Window> perturbed = windows;
    std::vector<fc::ForecastDistribution> dists;
    dists.reserve(entry.results.size());
    for (std::size_t i = 0; i < entry.results.size(); ++i) {
      pt.mean_l1 += st::perturbation_norms(entry.results[i]).l1;
      perturbed[i].covariates = entry.results[i].x_hat;
      dists.push_back(entry.results[i].theta_hat);
    }
    pt.mean_l1 /= static_cast<double>(entry.results.size());
    const ForecastSet fs = assemble(data, std::move(perturbed), std::move(dists));
    pt.report = tr::backtest(fs.mean_return, fs.bars, spec);
    if (pt.report.traded_returns.size() >= 2) {
      pt.kde = mt::return_kde(pt.report.traded_returns, cfg.kde_grid);
      pt.kde_available = !pt.kde.point_mass;
    }
    out.push_back(std::move(pt));
  }
  return out;
}

RunOutcome execute(const RunConfig& cfg, bool with_stress) {
  const RunConfig c = normalized(cfg);
  RunOutcome out;
  out.data = stage("prepare", [&] { return prepare(c); });
  auto trained = stage("train", [&] { return train_model(c, out.data); });
  out.train_log = std::move(trained.second);
  out.trained = c.checkpoint_path.empty();
  const fc::RnnForecaster& model = trained.first;
  out.forecasts = stage("forecast", [&] {
    return forecast_windows(model, out.data, out.data.test_windows.windows);
  });
  out.metrics =
      stage("metrics", [&] { return compute_metrics(c, model, out.data, out.forecasts); });
  out.passive_pct = stage("backtest", [&] {
    const auto span = std::span<const ts::PricePoint>(out.data.prices.points)
                          .subspan(out.data.split.test.begin, out.data.split.test.length());
    return tr::passive_return(span);
  });
  out.strategies =
      stage("backtest", [&] { return backtest_strategies(c, out.forecasts); });
  if (with_stress) {
    for (const auto& target : c.stress.targets) {
      out.stress_rows.push_back(
          stage("stress", [&] { return stress_target(c, model, out.data, target); }));
    }
    out.sweep = stage("stress-sweep", [&] { return stress_sweep(c, model, out.data); });
  }
  out.model = std::move(trained.first);
  return out;
}

RunOutcome run_pipeline(const RunConfig& cfg) {
  const RunConfig c = normalized(cfg);
  RunOutcome out = execute(c, true);
  out.artifacts = stage("emit", [&] { return rp::emit_artifacts(c, out); });
  return out;
}

}  // namespace stresscast::pl
