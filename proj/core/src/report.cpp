#include "stresscast/report.hpp"

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <system_error>

#include "json.hpp"
#include "stresscast/errors.hpp"

namespace stresscast::rp {
namespace {

namespace fsys = std::filesystem;
using nlohmann::json;

std::string fmt(double v) { return json(v).dump(); }

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[80];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

std::string file_tag(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '.') c = c == ',' ? '-' : 'p';
  }
  return s;
}

json range_json(const ts::IndexRange& r) {
  return {{"begin", r.begin}, {"end", r.end}};
}

json metrics_json(const mt::MetricReport& m) {
  json j{{"rmse", m.rmse},
         {"mape_excluded_zeros", m.mape_excluded_zeros},
         {"crps", m.crps},
         {"sign_accuracy_pct", m.binary_accuracy_pct},
         {"constant_sign_baseline_pct", m.historical_baseline_pct}};
  j["mape"] = m.mape ? json(*m.mape) : json(nullptr);
  return j;
}

json strategy_json(const pl::StrategyOutcome& o) {
  std::size_t skipped = 0, fallback = 0;
  for (const auto& r : o.report.records) {
    if (r.skipped_insufficient_history) ++skipped;
    if (r.kelly_fallback_full) ++fallback;
  }
  return {{"name", o.name},
          {"rolling_window", o.spec.rolling_window},
          {"compounded_return_pct", o.report.compounded_return_pct},
          {"percent_traded", o.report.percent_traded},
          {"mean_traded_return_pct", o.report.mean_traded_return_pct},
          {"traded_count", o.report.traded_count},
          {"periods", o.report.records.size()},
          {"skipped_insufficient_history", skipped},
          {"kelly_fallback_full", fallback}};
}

json strategies_json(const std::vector<pl::StrategyOutcome>& v) {
  json arr = json::array();
  for (const auto& o : v) arr.push_back(strategy_json(o));
  return arr;
}

// One Table-style row: identification, forecast-quality metrics, and the
// per-strategy returns. The unperturbed run uses null param/direction.
json stress_row_json(const mt::MetricReport& metrics,
                     const std::vector<pl::StrategyOutcome>& strategies,
                     const pl::StressRow* row) {
  json j;
  if (row) {
    j["param"] = fc::to_string(row->spec.param);
    j["direction"] = st::to_string(row->spec.direction);
    j["epsilon"] = row->spec.epsilon;
    j["iterations"] = row->spec.iterations;
    j["windows"] = row->results.size();
    j["mean_l1"] = row->mean_l1;
    j["max_linf"] = row->max_linf;
    j["mean_modified_cells"] = row->mean_modified;
    j["terminated_early_windows"] = row->terminated_early_count;
  } else {
    j["param"] = nullptr;
    j["direction"] = nullptr;
  }
  j["metrics"] = metrics_json(metrics);
  j["strategies"] = strategies_json(strategies);
  return j;
}

json config_json(const pl::RunConfig& cfg) {
  json j{{"seed", cfg.seed},
         {"frequency", ts::to_string(cfg.frequency)},
         {"out_dir", cfg.out_dir},
         {"window", {{"history", cfg.window.history}, {"horizon", cfg.window.horizon}}},
         {"covariate_lag", cfg.covariate_lag},
         {"crps_samples", cfg.crps_samples},
         {"kde_grid", cfg.kde_grid}};
  if (cfg.use_synthetic) {
    j["data"] = {{"synthetic",
                  {{"length", cfg.synthetic.length},
                   {"features", cfg.synthetic.features},
                   {"coupling", cfg.synthetic.coupling},
                   {"noise_scale", cfg.synthetic.noise_scale},
                   {"base_price", cfg.synthetic.base_price}}}};
  } else {
    j["data"] = {{"price_csv", cfg.price_csv}, {"feature_csv", cfg.feature_csv}};
  }
  j["train"] = {{"hidden", cfg.train.hidden},
                {"learning_rate", cfg.train.learning_rate},
                {"epochs", cfg.train.epochs},
                {"patience", cfg.train.patience},
                {"weight_decay", cfg.train.weight_decay},
                {"dropout", cfg.train.dropout}};
  if (!cfg.checkpoint_path.empty()) j["checkpoint_path"] = cfg.checkpoint_path;
  json strat = json::array();
  for (const auto& s : cfg.strategies) {
    strat.push_back({{"name", tr::to_string(s)}, {"rolling_window", s.rolling_window}});
  }
  j["strategies"] = strat;
  json targets = json::array();
  for (const auto& t : cfg.stress.targets) {
    targets.push_back(
        {{"param", fc::to_string(t.param)}, {"direction", st::to_string(t.direction)}});
  }
  j["stress"] = {{"epsilon", cfg.stress.epsilon},
                 {"iterations", cfg.stress.iterations},
                 {"targets", targets},
                 {"sweep_epsilons", cfg.stress.sweep_epsilons},
                 {"max_windows", cfg.stress.max_windows}};
  return j;
}

// Owns the list of files written so a failure can undo them.
class ArtifactGuard {
 public:
  explicit ArtifactGuard(fsys::path root) : root_(std::move(root)) {}
  ~ArtifactGuard() {
    if (armed_) {
      for (const auto& rel : written_) {
        std::error_code ec;
        fsys::remove(root_ / rel, ec);
      }
    }
  }
  void write(const std::string& rel, const std::string& content) {
    const fsys::path full = root_ / rel;
    std::ofstream out(full, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + full.string() + "'");
    out << content;
    out.flush();
    if (!out) throw ConfigError("write failed for '" + full.string() + "'");
    written_.push_back(rel);
  }
  template <class F>
  void write_with(const std::string& rel, F&& fill) {
    std::ostringstream buf;
    fill(buf);
    write(rel, buf.str());
  }
  std::vector<std::string> release() {
    armed_ = false;
    return std::move(written_);
  }

 private:
  fsys::path root_;
  std::vector<std::string> written_;
  bool armed_ = true;
};

void append_stress_log(const pl::StressRow& row, std::ostream& out) {
  out << "window_start,iteration,horizon_step,history_step,feature,delta\n";
  for (std::size_t i = 0; i < row.results.size(); ++i) {
    for (const auto& step : row.results[i].log) {
      out << row.window_starts[i] << ',' << step.iteration << ',' << step.horizon_step
          << ',' << step.history_step << ',' << step.feature << ',' << fmt(step.delta)
          << '\n';
    }
  }
}

json stress_file_json(const pl::StressRow& row) {
  json windows = json::array();
  for (std::size_t i = 0; i < row.results.size(); ++i) {
    const st::PerturbationNorms n = st::perturbation_norms(row.results[i]);
    windows.push_back({{"start", row.window_starts[i]},
                       {"l1", n.l1},
                       {"linf", n.linf},
                       {"modified_cells", n.modified},
                       {"applied_steps", row.results[i].log.size()},
                       {"terminated_early", row.results[i].terminated_early}});
  }
  json j = stress_row_json(row.metrics, row.strategies, &row);
  j["windows_detail"] = windows;
  return j;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string num(const json& j, const char* key, int decimals = 4) {
  if (!j.contains(key) || j.at(key).is_null()) return "-";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, j.at(key).get<double>());
  return buf;
}

}  // namespace

std::string summary_json(const pl::RunConfig& cfg, const pl::RunOutcome& outcome) {
  json j{{"schema_version", 1}, {"generated_at", utc_now()}};
  j["config"] = config_json(cfg);
  j["data"] = {{"periods", outcome.data.prices.size()},
               {"features", outcome.data.features.feature_count()},
               {"split",
                {{"train", range_json(outcome.data.split.train)},
                 {"valid", range_json(outcome.data.split.valid)},
                 {"test", range_json(outcome.data.split.test)}}},
               {"window_counts",
                {{"train", outcome.data.train_windows.windows.size()},
                 {"valid", outcome.data.valid_windows.windows.size()},
                 {"test", outcome.data.test_windows.windows.size()}}}};
  json training{{"trained", outcome.trained},
                {"epochs_run", outcome.train_log.train_nll.size()},
                {"best_epoch", outcome.train_log.best_epoch},
                {"best_valid_nll", outcome.train_log.best_valid_nll}};
  if (!outcome.train_log.train_nll.empty()) {
    training["final_train_nll"] = outcome.train_log.train_nll.back();
    training["final_valid_nll"] = outcome.train_log.valid_nll.back();
  }
  j["training"] = training;
  j["metrics"] = metrics_json(outcome.metrics);
  j["trading"] = {{"passive_return_pct", outcome.passive_pct},
                  {"strategies", strategies_json(outcome.strategies)}};

  json stress{{"regular", stress_row_json(outcome.metrics, outcome.strategies, nullptr)}};
  json rows = json::array();
  for (const auto& row : outcome.stress_rows) {
    rows.push_back(stress_row_json(row.metrics, row.strategies, &row));
  }
  stress["rows"] = rows;
  j["stress"] = stress;

  json sweep = json::array();
  for (const auto& pt : outcome.sweep) {
    sweep.push_back({{"epsilon", pt.epsilon},
                     {"mean_l1", pt.mean_l1},
                     {"strategy", "t0"},
                     {"compounded_return_pct", pt.report.compounded_return_pct},
                     {"percent_traded", pt.report.percent_traded},
                     {"traded_count", pt.report.traded_count}});
  }
  j["sweep"] = sweep;
  return j.dump(2) + "\n";
}

void write_training_log_csv(const fc::TrainLog& log, std::ostream& out) {
  out << "epoch,train_nll,valid_nll\n";
  for (std::size_t i = 0; i < log.train_nll.size(); ++i) {
    out << i + 1 << ',' << fmt(log.train_nll[i]) << ',' << fmt(log.valid_nll[i]) << '\n';
  }
}

void write_forecasts_csv(const pl::ForecastSet& fs, std::ostream& out) {
  out << "timestamp,mu,sigma,nu,truth_z,forecast_return\n";
  for (std::size_t i = 0; i < fs.periods.size(); ++i) {
    const fc::StudentTParams& p = fs.dists[i].steps.at(0);
    out << fs.bars[i].timestamp << ',' << fmt(p.mu) << ',' << fmt(p.sigma) << ','
        << fmt(p.nu) << ',' << fmt(fs.truth_z[i]) << ',' << fmt(fs.mean_return[i])
        << '\n';
  }
}

std::vector<std::string> emit_artifacts(const pl::RunConfig& cfg,
                                        const pl::RunOutcome& outcome) {
  const fsys::path root(cfg.out_dir);
  std::error_code ec;
  fsys::create_directories(root, ec);
  if (ec) throw ConfigError("cannot create output directory '" + root.string() + "'");
  ArtifactGuard guard(root);

  guard.write("summary.json", summary_json(cfg, outcome));
  if (outcome.model) guard.write("checkpoint.json", outcome.model->to_json());
  if (outcome.trained) {
    guard.write_with("training_log.csv",
                     [&](std::ostream& o) { write_training_log_csv(outcome.train_log, o); });
  }
  guard.write_with("forecasts.csv",
                   [&](std::ostream& o) { write_forecasts_csv(outcome.forecasts, o); });
  if (cfg.use_synthetic) {
    guard.write_with("prices.csv", [&](std::ostream& o) {
      io::write_price_csv(outcome.data.prices, o);
    });
    guard.write_with("features.csv", [&](std::ostream& o) {
      io::write_feature_csv(outcome.data.features, o);
    });
  }
  for (const auto& s : outcome.strategies) {
    const std::string tag = file_tag(s.name);
    guard.write_with("ledger_" + tag + ".csv",
                     [&](std::ostream& o) { tr::write_ledger_csv(s.report, o); });
    if (s.kde_available) {
      guard.write_with("kde_" + tag + ".csv",
                       [&](std::ostream& o) { mt::write_kde_csv(s.kde, o); });
    }
  }
  for (const auto& row : outcome.stress_rows) {
    const std::string tag =
        fc::to_string(row.spec.param) + "_" + st::to_string(row.spec.direction);
    guard.write("stress_" + tag + ".json", stress_file_json(row).dump(2) + "\n");
    guard.write_with("stress_" + tag + "_log.csv",
                     [&](std::ostream& o) { append_stress_log(row, o); });
  }
  for (const auto& pt : outcome.sweep) {
    const std::string tag = file_tag(fmt(pt.epsilon));
    json j{{"epsilon", pt.epsilon},
           {"mean_l1", pt.mean_l1},
           {"strategy", "t0"},
           {"compounded_return_pct", pt.report.compounded_return_pct},
           {"percent_traded", pt.report.percent_traded},
           {"traded_count", pt.report.traded_count}};
    guard.write("sweep_" + tag + ".json", j.dump(2) + "\n");
    if (pt.kde_available) {
      guard.write_with("kde_sweep_" + tag + ".csv",
                       [&](std::ostream& o) { mt::write_kde_csv(pt.kde, o); });
    }
  }
  return guard.release();
}

std::string render_text_report(const std::string& summary_json_text) {
  json j;
  try {
    j = json::parse(summary_json_text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("report: summary is not valid JSON: ") + e.what());
  }
  std::ostringstream out;
  const json& cfg = j.at("config");
  const json& data = j.at("data");
  out << "run: seed " << cfg.at("seed") << ", " << cfg.at("frequency").get<std::string>()
      << ", " << data.at("periods") << " periods, "
      << data.at("features") << " features\n";
  const json& sp = data.at("split");
  out << "split: train [" << sp.at("train").at("begin") << ", " << sp.at("train").at("end")
      << ")  valid [" << sp.at("valid").at("begin") << ", " << sp.at("valid").at("end")
      << ")  test [" << sp.at("test").at("begin") << ", " << sp.at("test").at("end")
      << ")\n";
  const json& tl = j.at("training");
  if (tl.at("trained").get<bool>()) {
    out << "training: " << tl.at("epochs_run") << " epochs, best epoch "
        << tl.at("best_epoch") << ", valid nll " << num(tl, "best_valid_nll") << "\n";
  } else {
    out << "training: skipped (checkpoint)\n";
  }
  const json& m = j.at("metrics");
  out << "forecast: rmse " << num(m, "rmse") << "  mape " << num(m, "mape", 2)
      << "  crps " << num(m, "crps") << "\n";
  out << "sign accuracy: " << num(m, "sign_accuracy_pct", 1) << "% vs baseline "
      << num(m, "constant_sign_baseline_pct", 1) << "%\n";

  const json& trade = j.at("trading");
  out << "trading (passive " << num(trade, "passive_return_pct", 2) << "%):\n";
  for (const json& s : trade.at("strategies")) {
    out << "  " << pad(s.at("name").get<std::string>(), 18)
        << pad(num(s, "compounded_return_pct", 2) + "%", 12) << "traded "
        << num(s, "percent_traded", 1) << "% (" << s.at("traded_count") << ")\n";
  }

  const json& rows = j.at("stress").at("rows");
  if (!rows.empty()) {
    out << "stress rows (param dir | rmse crps sign% | returns%):\n";
    for (const json& r : rows) {
      const json& rm = r.at("metrics");
      out << "  " << pad(r.at("param").get<std::string>(), 6)
          << pad(r.at("direction").get<std::string>(), 5) << "| "
          << num(rm, "rmse") << ' ' << num(rm, "crps") << ' '
          << num(rm, "sign_accuracy_pct", 1) << " |";
      for (const json& s : r.at("strategies")) {
        out << ' ' << s.at("name").get<std::string>() << ' '
            << num(s, "compounded_return_pct", 2);
      }
      out << '\n';
    }
  }
  const json& sweep = j.at("sweep");
  if (!sweep.empty()) {
    out << "sweep (t0 percent traded by epsilon):";
    for (const json& pt : sweep) {
      out << "  " << fmt(pt.at("epsilon").get<double>()) << " -> "
          << num(pt, "percent_traded", 1) << "%";
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace stresscast::rp
