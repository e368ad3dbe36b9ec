// Command line front end: simulate-data, train, backtest, stress, run, report.
// Exit codes: 0 ok, 2 configuration, 3 data, 4 numeric failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stresscast/data_io.hpp"
#include "stresscast/errors.hpp"
#include "stresscast/pipeline.hpp"
#include "stresscast/report.hpp"

namespace fsys = std::filesystem;
namespace fc = stresscast::fc;
namespace io = stresscast::io;
namespace pl = stresscast::pl;
namespace rp = stresscast::rp;
namespace st = stresscast::st;
namespace tr = stresscast::tr;

namespace {

struct Flags {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::vector<double> epsilons;
  std::string param;
  std::string direction;
  std::size_t iterations = 0;
  std::vector<std::string> strategies;
  std::string summary_path;  // report subcommand only
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_path, "JSON run configuration file");
  cmd->add_option("--seed", f.seed, "master seed overriding the config");
  cmd->add_option("--out", f.out_dir, "output directory overriding the config");
  cmd->add_option("--epsilon", f.epsilons,
                  "perturbation size sweep list; a single value also becomes the "
                  "per-target step size")
      ->delimiter(',');
  cmd->add_option("--param", f.param, "perturbation target parameter")
      ->check(CLI::IsMember({"mu", "sigma", "nu"}));
  cmd->add_option("--direction", f.direction, "perturbation direction")
      ->check(CLI::IsMember({"up", "down"}));
  cmd->add_option("--iterations", f.iterations, "perturbation iteration count R");
  cmd->add_option("--strategy", f.strategies,
                  "strategy name (t0 or t-musigma, optionally with ,kelly); "
                  "repeatable, replaces the config list");
}

pl::RunConfig build_config(const CLI::App* cmd, const Flags& f) {
  pl::RunConfig cfg =
      f.config_path.empty() ? pl::RunConfig{} : pl::load_config(f.config_path);
  if (cmd->count("--seed")) cfg.seed = f.seed;
  if (cmd->count("--out")) cfg.out_dir = f.out_dir;
  if (cmd->count("--strategy")) {
    cfg.strategies.clear();
    for (const auto& name : f.strategies) {
      cfg.strategies.push_back(tr::strategy_from_string(name));
    }
  }
  if (cmd->count("--param") || cmd->count("--direction")) {
    pl::StressTarget target;
    if (cmd->count("--param")) target.param = fc::param_index_from_string(f.param);
    if (cmd->count("--direction")) {
      target.direction = st::direction_from_string(f.direction);
    }
    cfg.stress.targets = {target};
  }
  if (cmd->count("--iterations")) cfg.stress.iterations = f.iterations;
  if (cmd->count("--epsilon")) {
    cfg.stress.sweep_epsilons = f.epsilons;
    if (f.epsilons.size() == 1) cfg.stress.epsilon = f.epsilons.front();
  }
  cfg.validate();
  return cfg;
}

void write_file(const fsys::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw stresscast::ConfigError("cannot write '" + path.string() + "'");
  out << content;
  out.flush();
  if (!out) throw stresscast::ConfigError("write failed for '" + path.string() + "'");
}

std::string read_file(const fsys::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw stresscast::DataError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fsys::path ensure_out(const pl::RunConfig& cfg) {
  const fsys::path root(cfg.out_dir);
  std::error_code ec;
  fsys::create_directories(root, ec);
  if (ec) {
    throw stresscast::ConfigError("cannot create output directory '" + root.string() +
                                  "'");
  }
  return root;
}

int run_simulate(const CLI::App* cmd, const Flags& f) {
  const pl::RunConfig cfg = build_config(cmd, f);
  io::SyntheticSpec spec = cfg.synthetic;
  spec.seed = cfg.seed;
  spec.frequency = cfg.frequency;
  const auto [prices, features] = io::generate_synthetic(spec);
  const fsys::path root = ensure_out(cfg);
  std::ostringstream pbuf, fbuf;
  io::write_price_csv(prices, pbuf);
  io::write_feature_csv(features, fbuf);
  write_file(root / "prices.csv", pbuf.str());
  write_file(root / "features.csv", fbuf.str());
  std::cout << "wrote " << (root / "prices.csv").string() << " and "
            << (root / "features.csv").string() << " (" << prices.size()
            << " periods, " << features.feature_count() << " features)\n";
  return 0;
}

int run_train(const CLI::App* cmd, const Flags& f) {
  const pl::RunConfig cfg = build_config(cmd, f);
  const pl::Dataset data = pl::prepare(cfg);
  const auto [model, log] = pl::train_model(cfg, data);
  const fsys::path root = ensure_out(cfg);
  write_file(root / "checkpoint.json", model.to_json());
  std::ostringstream buf;
  rp::write_training_log_csv(log, buf);
  write_file(root / "training_log.csv", buf.str());
  std::cout << "trained " << log.train_nll.size() << " epochs, best epoch "
            << log.best_epoch << " (valid nll " << log.best_valid_nll
            << "), checkpoint " << (root / "checkpoint.json").string() << "\n";
  return 0;
}

int emit_and_render(const pl::RunConfig& cfg, const pl::RunOutcome& outcome) {
  std::cout << rp::render_text_report(
      read_file(fsys::path(cfg.out_dir) / "summary.json"));
  std::cout << "artifacts: " << outcome.artifacts.size() << " files in " << cfg.out_dir
            << "\n";
  return 0;
}

int run_backtest(const CLI::App* cmd, const Flags& f) {
  const pl::RunConfig cfg = build_config(cmd, f);
  pl::RunOutcome outcome = pl::execute(cfg, false);
  outcome.artifacts = rp::emit_artifacts(cfg, outcome);
  return emit_and_render(cfg, outcome);
}

int run_full(const CLI::App* cmd, const Flags& f) {
  const pl::RunConfig cfg = build_config(cmd, f);
  const pl::RunOutcome outcome = pl::run_pipeline(cfg);
  return emit_and_render(cfg, outcome);
}

int run_report(const CLI::App* cmd, const Flags& f) {
  fsys::path path;
  if (!f.summary_path.empty()) {
    path = f.summary_path;
  } else {
    pl::RunConfig cfg = build_config(cmd, f);
    path = fsys::path(cfg.out_dir) / "summary.json";
  }
  std::cout << rp::render_text_report(read_file(path));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"student-T forecaster with gradient stress testing and backtests"};
  app.require_subcommand(1);
  Flags f;

  CLI::App* simulate =
      app.add_subcommand("simulate-data", "generate a synthetic price/feature dataset");
  CLI::App* train = app.add_subcommand("train", "train a forecaster and save it");
  CLI::App* backtest =
      app.add_subcommand("backtest", "forecast the test split and trade on it");
  CLI::App* stress = app.add_subcommand(
      "stress", "full pipeline with input perturbation; --param/--direction narrow it");
  CLI::App* run = app.add_subcommand("run", "full pipeline: data, train, trade, stress");
  CLI::App* report =
      app.add_subcommand("report", "print a text digest of an emitted summary.json");
  for (CLI::App* cmd : {simulate, train, backtest, stress, run, report}) {
    add_common(cmd, f);
  }
  report->add_option("summary", f.summary_path, "path to summary.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const CLI::App* cmd = app.get_subcommands().front();
  try {
    if (cmd == simulate) return run_simulate(cmd, f);
    if (cmd == train) return run_train(cmd, f);
    if (cmd == backtest) return run_backtest(cmd, f);
    if (cmd == report) return run_report(cmd, f);
    return run_full(cmd, f);
  } catch (const stresscast::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const stresscast::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const stresscast::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
