// Acceptance gate: ten numbered checks over the whole library, one PASS/FAIL
// line each. Exits with the number of failed checks so any red line fails the
// suite. Each check is self-contained; expected values come from hand
// calculation, closed forms, or independent straight-line re-implementations,
// never from the code under test.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "stresscast/autodiff.hpp"
#include "stresscast/data_io.hpp"
#include "stresscast/errors.hpp"
#include "stresscast/forecaster.hpp"
#include "stresscast/metrics.hpp"
#include "stresscast/pipeline.hpp"
#include "stresscast/stress.hpp"
#include "stresscast/timeseries.hpp"
#include "stresscast/trading.hpp"

namespace ad = stresscast::ad;
namespace fc = stresscast::fc;
namespace io = stresscast::io;
namespace mt = stresscast::mt;
namespace pl = stresscast::pl;
namespace st = stresscast::st;
namespace tr = stresscast::tr;
namespace ts = stresscast::ts;
using stresscast::Matrix;
using stresscast::NumericError;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

// The floor keeps near-zero values from inflating the ratio; below it the
// comparison is effectively absolute. Central differences at h=1e-6 carry
// about 1e-10 of cancellation noise, so gradient entries under 1e-6 cannot be
// resolved relatively and get the larger floor.
double rel_err(double got, double want, double floor_scale) {
  const double scale = std::max({std::abs(got), std::abs(want), floor_scale});
  return std::abs(got - want) / scale;
}

// ---------------------------------------------------------------------------
// check 1 support: random compositions of the primitive set, evaluable on the
// tape and on plain doubles so central differences can replay them.

struct RandomProgram {
  struct Step {
    int op;
    int lhs;
    int rhs;
  };
  std::size_t inputs;
  std::vector<Step> steps;

  static RandomProgram make(std::mt19937_64& rng) {
    RandomProgram p;
    std::uniform_int_distribution<int> op_dist(0, 9);
    std::uniform_int_distribution<std::size_t> in_dist(2, 4);
    std::uniform_int_distribution<int> depth_dist(3, 8);
    p.inputs = in_dist(rng);
    const int depth = depth_dist(rng);
    for (int d = 0; d < depth; ++d) {
      const int avail = static_cast<int>(p.inputs) + d;
      std::uniform_int_distribution<int> pick(0, avail - 1);
      p.steps.push_back({op_dist(rng), pick(rng), pick(rng)});
    }
    return p;
  }

  template <class V, class Ops>
  V eval(std::span<const V> x, Ops&& ops) const {
    std::vector<V> stack(x.begin(), x.end());
    for (const Step& s : steps) {
      const V a = stack[static_cast<std::size_t>(s.lhs)];
      const V b = stack[static_cast<std::size_t>(s.rhs)];
      stack.push_back(ops(s.op, a, b));
    }
    return stack.back();
  }

  double eval_plain(std::span<const double> x) const {
    return eval<double>(x, [](int op, double a, double b) {
      switch (op) {
        case 0: return a + b;
        case 1: return a - b;
        case 2: return a * b;
        case 3: return a / (2.0 + b * b);
        case 4: return std::exp(0.25 * a);
        case 5: return std::tanh(a);
        case 6: return ad::Tape::sigmoid_fwd(a);
        case 7: return ad::Tape::softplus_fwd(a);
        case 8: return a * a;
        default: return std::log(1.5 + std::tanh(b) + a * 0.0);
      }
    });
  }

  ad::Value eval_taped(ad::Tape& tape, std::span<const ad::Value> x) const {
    return eval<ad::Value>(x, [&](int op, ad::Value a, ad::Value b) {
      switch (op) {
        case 0: return a + b;
        case 1: return a - b;
        case 2: return a * b;
        case 3: return a / (2.0 + ad::square(b));
        case 4: return ad::exp(0.25 * a);
        case 5: return ad::tanh(a);
        case 6: return ad::sigmoid(a);
        case 7: return ad::softplus(a);
        case 8: return ad::square(a);
        default: return ad::log(1.5 + ad::tanh(b) + a * 0.0);
      }
    });
  }
};

// ---------------------------------------------------------------------------
// shared generators

std::vector<ts::Window> iid_windows(double mean, double sd, std::size_t total,
                                    std::size_t k, std::size_t tau, std::size_t features,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(mean, sd);
  std::vector<double> z(total);
  for (double& v : z) v = dist(rng);
  std::vector<ts::Window> out;
  for (std::size_t start = 0; start + k + tau <= total; ++start) {
    ts::Window w;
    w.start = start;
    w.z_history.assign(z.begin() + static_cast<std::ptrdiff_t>(start),
                       z.begin() + static_cast<std::ptrdiff_t>(start + k));
    w.covariates = Matrix(k, features);
    w.z_future.assign(z.begin() + static_cast<std::ptrdiff_t>(start + k),
                      z.begin() + static_cast<std::ptrdiff_t>(start + k + tau));
    out.push_back(std::move(w));
  }
  return out;
}

fc::RnnForecaster random_forecaster(std::mt19937_64& rng, std::size_t hidden,
                                    std::size_t features, ts::WindowSpec win) {
  return fc::RnnForecaster(fc::init_params(rng(), hidden, features), win);
}

std::vector<double> random_history(std::mt19937_64& rng, std::size_t k) {
  std::normal_distribution<double> d(0.0, 0.5);
  std::vector<double> z(k);
  for (double& v : z) v = d(rng);
  return z;
}

// ---------------------------------------------------------------------------
// check 4 support: a model whose every output parameter is the same linear
// functional of the covariate window, so the perturbation direction argument
// is exact rather than first-order.

class LinearSurrogate final : public fc::ForecastModel {
 public:
  LinearSurrogate(std::vector<double> weights, ts::WindowSpec win)
      : w_(std::move(weights)), win_(win) {}

  std::size_t history() const override { return win_.history; }
  std::size_t horizon() const override { return win_.horizon; }
  std::size_t feature_count() const override { return w_.size(); }

  fc::ForecastDistribution forecast(std::span<const double>,
                                    const Matrix& x) const override {
    double acc = 0.0;
    for (std::size_t s = 0; s < x.rows(); ++s) {
      for (std::size_t i = 0; i < x.cols(); ++i) acc += w_[i] * x(s, i);
    }
    fc::ForecastDistribution d;
    d.steps.assign(win_.horizon, fc::StudentTParams{acc, acc, acc});
    return d;
  }

  Matrix input_gradient(std::span<const double>, const Matrix& x, fc::ParamIndex,
                        std::size_t) const override {
    Matrix g(x.rows(), x.cols());
    for (std::size_t s = 0; s < x.rows(); ++s) {
      for (std::size_t i = 0; i < x.cols(); ++i) g(s, i) = w_[i];
    }
    return g;
  }

 private:
  std::vector<double> w_;
  ts::WindowSpec win_;
};

// ---------------------------------------------------------------------------
// check 6 support: straight-line strategy replay sharing nothing with the
// production backtest.

std::vector<ts::PricePoint> bars_from_returns(std::span<const double> returns) {
  std::vector<ts::PricePoint> bars;
  double open = 100.0;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    ts::PricePoint p;
    char buf[32];
    std::snprintf(buf, sizeof buf, "p%04zu", i);
    p.timestamp = buf;
    p.open = open;
    p.close = open * (1.0 + returns[i]);
    open = p.close;
    bars.push_back(p);
  }
  return bars;
}

struct NaiveOutcome {
  std::vector<bool> traded;
  std::vector<double> fraction;
  double compounded_pct = 0.0;
};

NaiveOutcome naive_backtest(const std::vector<double>& forecasts,
                            const std::vector<ts::PricePoint>& bars, bool rolling,
                            bool kelly, std::size_t k) {
  NaiveOutcome out;
  std::vector<double> all_y;
  std::vector<double> trade_y;
  double product = 1.0;
  for (std::size_t p = 0; p < bars.size(); ++p) {
    const double y = bars[p].close / bars[p].open - 1.0;
    bool take = false;
    if (rolling) {
      if (all_y.size() >= k) {
        double m = 0.0;
        for (std::size_t i = all_y.size() - k; i < all_y.size(); ++i) m += all_y[i];
        m /= static_cast<double>(k);
        double ss = 0.0;
        for (std::size_t i = all_y.size() - k; i < all_y.size(); ++i) {
          ss += (all_y[i] - m) * (all_y[i] - m);
        }
        take = forecasts[p] >= m + std::sqrt(ss / static_cast<double>(k - 1));
      }
    } else {
      take = forecasts[p] >= 0.0;
    }
    double f = 0.0;
    if (take) {
      f = 1.0;
      if (kelly && trade_y.size() >= k) {
        std::size_t wins = 0, gains = 0, losses = 0;
        double gain = 0.0, loss = 0.0;
        for (std::size_t i = trade_y.size() - k; i < trade_y.size(); ++i) {
          if (trade_y[i] > 0.0) {
            ++wins;
            gain += trade_y[i];
            ++gains;
          } else if (trade_y[i] < 0.0) {
            loss -= trade_y[i];
            ++losses;
          }
        }
        if (gains > 0 && losses > 0) {
          const double w = static_cast<double>(wins) / static_cast<double>(k);
          const double r =
              (gain / static_cast<double>(gains)) / (loss / static_cast<double>(losses));
          f = std::clamp(w - (1.0 - w) / r, 0.0, 1.0);
        }
      }
      product *= 1.0 + f * y;
      trade_y.push_back(y);
    }
    out.traded.push_back(take);
    out.fraction.push_back(f);
    all_y.push_back(y);
  }
  out.compounded_pct = (product - 1.0) * 100.0;
  return out;
}

// ---------------------------------------------------------------------------
// checks 5 and 8 share one trained model on strongly coupled synthetic data.
// The short history window and the long low-rate training run are what let
// the input-weight column of the informative covariate dominate the others.

struct CoupledRun {
  pl::RunConfig cfg;
  pl::Dataset data;
  fc::RnnForecaster model;
  fc::TrainLog log;
  double build_seconds = 0.0;
};

CoupledRun build_coupled_run() {
  Timer timer;
  pl::RunConfig cfg;
  cfg.seed = 11;
  cfg.synthetic.length = 800;
  cfg.synthetic.features = 4;
  cfg.synthetic.coupling = 0.2;
  cfg.synthetic.noise_scale = 0.01;
  cfg.window = {2, 3};
  cfg.train.hidden = 16;
  cfg.train.learning_rate = 0.02;
  cfg.train.epochs = 600;
  cfg.train.patience = 200;
  cfg.train.weight_decay = 1e-4;
  cfg.train.dropout = 0.0;
  cfg.stress.iterations = 3;
  cfg.stress.sweep_epsilons = {0.0, 0.01, 0.03, 0.1};

  pl::Dataset data = pl::prepare(cfg);
  auto [model, log] = pl::train_model(cfg, data);
  CoupledRun run{std::move(cfg), std::move(data), std::move(model), std::move(log), 0.0};
  run.build_seconds = timer.seconds();
  return run;
}

// ---------------------------------------------------------------------------
// the checks

struct Outcome {
  bool ok = false;
  std::string detail;
};

// reverse-mode gradients against central differences, on free-form graphs and
// on the forecaster's covariate-window gradients
Outcome check_gradients() {
  Timer timer;

  std::mt19937_64 rng(20240817);
  std::uniform_real_distribution<double> input_dist(-2.0, 2.0);
  int graphs = 0, attempts = 0, graph_bad = 0;
  double graph_worst = 0.0;
  while (graphs < 100) {
    if (++attempts > 2000) return {false, "random graph generation stalled"};
    const RandomProgram prog = RandomProgram::make(rng);
    std::vector<double> x(prog.inputs);
    for (double& xi : x) xi = input_dist(rng);

    ad::Tape tape;
    const std::vector<ad::Value> vars = tape.vars(x);
    ad::Value out;
    try {
      out = prog.eval_taped(tape, vars);
    } catch (const NumericError&) {
      continue;  // chained square/exp overflowed; redraw
    }
    const ad::GradientMap g = tape.backward(out);
    const std::vector<double> fd = ad::finite_diff_gradient(
        [&](std::span<const double> v) { return prog.eval_plain(v); }, x, 1e-5);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double rel = rel_err(g.at(vars[i]), fd[i], 1e-8);
      graph_worst = std::max(graph_worst, rel);
      if (rel >= 1e-4) ++graph_bad;
    }
    ++graphs;
  }

  std::mt19937_64 mrng(771);
  std::uniform_real_distribution<double> xd(-1.0, 1.0);
  int models = 0, model_bad = 0;
  double model_worst = 0.0;
  while (models < 50) {
    const std::size_t hidden = 1 + mrng() % 4;
    const std::size_t n = 1 + mrng() % 3;
    const std::size_t k = 1 + mrng() % 5;
    const std::size_t tau = 1 + mrng() % 3;
    const fc::RnnForecaster model = random_forecaster(mrng, hidden, n, {k, tau});
    const std::vector<double> z = random_history(mrng, k);
    Matrix x(k, n);
    for (std::size_t s = 0; s < k; ++s) {
      for (std::size_t i = 0; i < n; ++i) x(s, i) = xd(mrng);
    }
    const auto p = static_cast<fc::ParamIndex>(models % 3);
    const std::size_t t = mrng() % tau;

    const Matrix grad = model.input_gradient(z, x, p, t);
    const std::vector<double> flat = x.data();
    const std::vector<double> fd = ad::finite_diff_gradient(
        [&](std::span<const double> v) {
          Matrix xx(k, n);
          std::copy(v.begin(), v.end(), xx.data().begin());
          return model.forecast(z, xx).steps[t].param(p);
        },
        flat, 1e-6);
    for (std::size_t s = 0; s < k; ++s) {
      for (std::size_t i = 0; i < n; ++i) {
        const double rel = rel_err(grad(s, i), fd[s * n + i], 1e-6);
        model_worst = std::max(model_worst, rel);
        if (rel >= 1e-3) ++model_bad;
      }
    }
    ++models;
  }

  const double secs = timer.seconds();
  const bool ok = graph_bad == 0 && model_bad == 0 && secs < 30.0;
  return {ok, fmt("100 graphs worst rel %.1e, 50 forecasters worst rel %.1e (%.1f s)",
                  graph_worst, model_worst, secs)};
}

// maximum-likelihood recovery of i.i.d. Gaussian moments, and the heavy-tail
// density degenerating to the Gaussian one
Outcome check_likelihood() {
  Timer timer;
  const double true_mean = 0.3, true_sd = 0.15;
  const std::vector<ts::Window> train_w = iid_windows(true_mean, true_sd, 260, 5, 1, 1, 7);
  const std::vector<ts::Window> valid_w = iid_windows(true_mean, true_sd, 60, 5, 1, 1, 8);

  double sum = 0.0, sq = 0.0;
  for (const auto& w : train_w) {
    sum += w.z_future[0];
    sq += w.z_future[0] * w.z_future[0];
  }
  const double count = static_cast<double>(train_w.size());
  const double sample_mean = sum / count;
  const double sample_sd = std::sqrt(sq / count - sample_mean * sample_mean);

  fc::TrainConfig cfg;
  cfg.hidden = 8;
  cfg.learning_rate = 0.05;
  cfg.epochs = 300;
  cfg.patience = 60;
  cfg.weight_decay = 0.0;
  cfg.seed = 17;
  const auto [params, log] = fc::train(train_w, valid_w, cfg);
  const fc::RnnForecaster model(params, {5, 1});

  double mu_acc = 0.0, sg_acc = 0.0;
  for (const auto& w : valid_w) {
    const auto d = model.forecast(w.z_history, w.covariates);
    mu_acc += d.steps[0].mu;
    sg_acc += d.steps[0].sigma;
  }
  const double mu_hat = mu_acc / static_cast<double>(valid_w.size());
  const double sigma_hat = sg_acc / static_cast<double>(valid_w.size());
  const double mu_err = std::abs(mu_hat - sample_mean);
  const double sd_rel = std::abs(sigma_hat - sample_sd) / sample_sd;

  const double half_log_2pi = 0.5 * std::log(2.0 * 3.14159265358979323846);
  const double limit_err = std::abs(fc::nll({0.0, 1.0, 1e6}, 0.0) - half_log_2pi);

  const double secs = timer.seconds();
  const bool ok = mu_err < 0.05 && sd_rel < 0.20 && limit_err < 1e-3 && secs < 120.0;
  return {ok, fmt("location err %.4f, scale rel err %.1f%%, gaussian-limit err %.1e (%.1f s)",
                  mu_err, 100.0 * sd_rel, limit_err, secs)};
}

// every perturbed entry inside its bounds and inside the per-cell step budget
Outcome check_bounds_budget() {
  Timer timer;
  std::mt19937_64 rng(3030);
  std::uniform_real_distribution<double> eps_d(0.005, 0.05);
  std::uniform_real_distribution<double> span_d(0.05, 1.5);
  std::size_t entries = 0, violations = 0;

  for (int run = 0; run < 500; ++run) {
    const std::size_t k = 2 + rng() % 4;
    const std::size_t n = 1 + rng() % 3;
    const std::size_t tau = 1 + rng() % 3;
    const std::size_t iters = 1 + rng() % 3;
    const double eps = eps_d(rng);

    st::FeatureBounds bounds;
    for (std::size_t i = 0; i < n; ++i) {
      bounds.lower.push_back(-span_d(rng));
      bounds.upper.push_back(span_d(rng));
    }
    Matrix x(k, n);
    for (std::size_t s = 0; s < k; ++s) {
      for (std::size_t i = 0; i < n; ++i) {
        std::uniform_real_distribution<double> cell(bounds.lower[i], bounds.upper[i]);
        x(s, i) = cell(rng);
      }
    }
    const fc::RnnForecaster model = random_forecaster(rng, 2 + rng() % 3, n, {k, tau});
    const std::vector<double> z = random_history(rng, k);
    st::PerturbationSpec spec;
    spec.param = static_cast<fc::ParamIndex>(run % 3);
    spec.direction = run % 2 == 0 ? st::Direction::up : st::Direction::down;
    spec.epsilon = eps;
    spec.iterations = iters;

    const st::StressResult res = st::perturb(model, z, x, spec, bounds);
    const double budget = static_cast<double>(iters * tau) * eps + 1e-12;
    for (std::size_t s = 0; s < k; ++s) {
      for (std::size_t i = 0; i < n; ++i) {
        ++entries;
        const double v = res.x_hat(s, i);
        const bool in_bounds = v >= bounds.lower[i] && v <= bounds.upper[i];
        const bool in_budget = std::abs(v - x(s, i)) <= budget;
        if (!in_bounds || !in_budget) ++violations;
      }
    }
  }

  const double secs = timer.seconds();
  const bool ok = violations == 0 && secs < 60.0;
  return {ok, fmt("%zu entries over 500 runs, %zu violations (%.1f s)", entries,
                  violations, secs)};
}

// the sign of the achieved parameter shift matches the requested direction
Outcome check_directionality() {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> xd(-1.0, 1.0);
  int trials = 0, agree = 0, attempts = 0;
  while (trials < 200 && attempts < 4000) {
    ++attempts;
    const std::size_t k = 1 + rng() % 4;
    const std::size_t n = 1 + rng() % 3;
    const fc::RnnForecaster model = random_forecaster(rng, 2 + rng() % 4, n, {k, 1});
    const std::vector<double> z = random_history(rng, k);
    Matrix x(k, n);
    for (std::size_t s = 0; s < k; ++s) {
      for (std::size_t i = 0; i < n; ++i) x(s, i) = xd(rng);
    }
    st::PerturbationSpec spec;
    spec.param = static_cast<fc::ParamIndex>(trials % 3);
    spec.direction = trials % 2 == 0 ? st::Direction::up : st::Direction::down;
    spec.epsilon = 1e-3;
    spec.iterations = 1;
    const st::FeatureBounds bounds = st::FeatureBounds::uniform(n, -10.0, 10.0);

    const st::StressResult res = st::perturb(model, z, x, spec, bounds);
    if (res.log.empty()) continue;  // all gradients exactly zero; redraw
    const double delta = res.theta_hat.steps[0].param(spec.param) -
                         res.theta.steps[0].param(spec.param);
    if (spec.direction == st::Direction::up ? delta > 0.0 : delta < 0.0) ++agree;
    ++trials;
  }

  std::mt19937_64 srng(555);
  std::uniform_real_distribution<double> wd(-1.0, 1.0);
  int bracketed = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + srng() % 5;
    const std::size_t n = 1 + srng() % 3;
    const std::size_t tau = 1 + srng() % 3;
    std::vector<double> w(n);
    double biggest = 0.0;
    do {
      for (double& wi : w) wi = wd(srng);
      biggest = 0.0;
      for (double wi : w) biggest = std::max(biggest, std::abs(wi));
    } while (biggest < 0.05);
    const LinearSurrogate model(w, {k, tau});
    const std::vector<double> z(k, 0.0);
    Matrix x(k, n);
    for (std::size_t s = 0; s < k; ++s) {
      for (std::size_t i = 0; i < n; ++i) x(s, i) = wd(srng);
    }
    const st::FeatureBounds bounds = st::FeatureBounds::uniform(n, -10.0, 10.0);
    st::PerturbationSpec up{fc::ParamIndex::mu, st::Direction::up, 0.01, 2};
    st::PerturbationSpec down{fc::ParamIndex::mu, st::Direction::down, 0.01, 2};
    const st::StressResult ru = st::perturb(model, z, x, up, bounds);
    const st::StressResult rd = st::perturb(model, z, x, down, bounds);
    bool all_t = true;
    for (std::size_t t = 0; t < tau; ++t) {
      const double base = ru.theta.steps[t].mu;
      if (ru.theta_hat.steps[t].mu < base - 1e-12) all_t = false;
      if (rd.theta_hat.steps[t].mu > base + 1e-12) all_t = false;
    }
    if (all_t) ++bracketed;
  }

  const bool ok = trials == 200 && agree >= 190 && bracketed == 100;
  return {ok, fmt("%d/200 random trials agree, %d/100 linear surrogates bracketed",
                  agree, bracketed)};
}

// pushing the forecast location upward trades at least as often at every
// larger step size, and strictly more at the largest
Outcome check_sweep_monotone(const CoupledRun* run, const std::string& build_error) {
  if (run == nullptr) return {false, "coupled run unavailable: " + build_error};
  Timer timer;
  const std::vector<pl::SweepPoint> sweep =
      pl::stress_sweep(run->cfg, run->model, run->data);
  if (sweep.size() != 4) return {false, fmt("expected 4 sweep points, got %zu", sweep.size())};

  bool monotone = true;
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    if (sweep[i].report.percent_traded < sweep[i - 1].report.percent_traded) monotone = false;
  }
  const bool strict = sweep.back().report.percent_traded > sweep.front().report.percent_traded;
  const double secs = run->build_seconds + timer.seconds();
  const bool ok = monotone && strict && secs < 300.0;
  return {ok, fmt("days traded %.1f%% -> %.1f%% -> %.1f%% -> %.1f%% (%.1f s)",
                  sweep[0].report.percent_traded, sweep[1].report.percent_traded,
                  sweep[2].report.percent_traded, sweep[3].report.percent_traded, secs)};
}

// bit-level agreement with the straight-line strategy replay
Outcome check_trading_oracle() {
  std::mt19937_64 rng(6001);
  std::uniform_int_distribution<std::size_t> len_d(1, 60);
  std::uniform_int_distribution<std::size_t> k_d(2, 8);
  std::uniform_real_distribution<double> ret_d(-0.05, 0.06);
  std::uniform_real_distribution<double> fc_d(-0.04, 0.05);

  int mismatches = 0;
  for (int scenario = 0; scenario < 1000; ++scenario) {
    const std::size_t len = len_d(rng);
    const bool rolling = rng() % 2 == 0;
    const bool kelly = rng() % 2 == 0;
    const std::size_t k = k_d(rng);
    std::vector<double> returns(len), forecasts(len);
    for (double& r : returns) r = ret_d(rng);
    for (double& f : forecasts) f = fc_d(rng);
    const std::vector<ts::PricePoint> bars = bars_from_returns(returns);

    tr::StrategySpec spec;
    spec.threshold =
        rolling ? tr::ThresholdKind::rolling_mean_plus_std : tr::ThresholdKind::fixed_zero;
    spec.sizing = kelly ? tr::Sizing::kelly : tr::Sizing::full;
    spec.rolling_window = k;

    const tr::BacktestReport got = tr::backtest(forecasts, bars, spec);
    const NaiveOutcome want = naive_backtest(forecasts, bars, rolling, kelly, k);

    bool same = got.records.size() == len;
    for (std::size_t p = 0; same && p < len; ++p) {
      if (got.records[p].traded != want.traded[p]) same = false;
      if (got.records[p].fraction != want.fraction[p]) same = false;
    }
    const double scale = std::max({1.0, std::abs(got.compounded_return_pct),
                                   std::abs(want.compounded_pct)});
    if (std::abs(got.compounded_return_pct - want.compounded_pct) > 1e-12 * scale) {
      same = false;
    }
    if (!same) ++mismatches;
  }
  return {mismatches == 0, fmt("1000 scenarios, %d mismatches", mismatches)};
}

// hand-computed error metrics, the closed-form Gaussian score, and the
// position-sizing formula
Outcome check_metric_oracles() {
  bool ok = true;
  std::string why;

  const std::vector<double> y1{1.0, 2.0, 3.0};
  if (mt::rmse(y1, y1) != 0.0) { ok = false; why += " rmse-zero"; }
  const std::vector<double> y2{2.0, 3.0, 5.0};
  if (std::abs(mt::rmse(y1, y2) - std::sqrt(2.0)) > 1e-12) { ok = false; why += " rmse"; }

  const std::vector<double> my{1.0, 2.0, 4.0};
  const std::vector<double> mh{2.0, 1.0, 5.0};
  const mt::MapeResult mr = mt::mape(my, mh);
  if (!mr.value || std::abs(*mr.value - 7.0 / 12.0) > 1e-12) { ok = false; why += " mape"; }

  std::mt19937_64 rng(42);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> samples(100000);
  for (double& s : samples) s = gauss(rng);
  const double crps = mt::crps_empirical(samples, 0.0);
  const double crps_err = std::abs(crps - 0.23370) / 0.23370;
  if (crps_err >= 0.01) { ok = false; why += " crps"; }

  if (std::abs(tr::kelly_fraction(0.6, 2.0) - 0.4) > 1e-12) { ok = false; why += " kelly-0.4"; }
  if (tr::kelly_fraction(1.0, 0.5) != 1.0) { ok = false; why += " kelly-1"; }
  if (tr::kelly_fraction(0.5, 1.0) != 0.0) { ok = false; why += " kelly-0"; }

  return {ok, ok ? fmt("rmse/mape exact, crps rel err %.2f%%, kelly exact", 100.0 * crps_err)
                 : "failed:" + why};
}

// the perturbation search concentrates its moves on the one informative
// covariate
Outcome check_feature_mass(const CoupledRun* run, const std::string& build_error) {
  if (run == nullptr) return {false, "coupled run unavailable: " + build_error};
  const st::FeatureBounds bounds = st::FeatureBounds::from_stats(run->data.stats);
  st::PerturbationSpec spec{fc::ParamIndex::mu, st::Direction::up, 0.03, 2};
  const auto& windows = run->data.test_windows.windows;
  std::vector<double> mass(run->cfg.synthetic.features, 0.0);
  std::size_t used = 0;
  for (std::size_t i = 0; i < 20 && i < windows.size(); ++i) {
    const st::StressResult res =
        st::perturb(run->model, windows[i].z_history, windows[i].covariates, spec, bounds);
    const std::vector<double> m = st::perturbation_mass_by_feature(res);
    for (std::size_t f = 0; f < m.size(); ++f) mass[f] += m[f];
    ++used;
  }
  double total = 0.0;
  for (double m : mass) total += m;
  const double frac = total > 0.0 ? mass[0] / total : 0.0;
  const bool ok = used == 20 && frac >= 0.70;
  return {ok, fmt("%.1f%% of applied mass on the coupled covariate over %zu windows",
                  100.0 * frac, used)};
}

// the published absolute train/valid/test lengths at both frequencies
Outcome check_split_fidelity() {
  const ts::SplitSpec daily = ts::apply_split(1306, ts::Frequency::daily);
  const ts::SplitSpec hourly = ts::apply_split(2890, ts::Frequency::hourly);
  const bool daily_ok = daily.train.begin == 0 && daily.train.end == 1150 &&
                        daily.valid.begin == 1150 && daily.valid.end == 1190 &&
                        daily.test.begin == 1190 && daily.test.end == 1306;
  const bool hourly_ok = hourly.train.begin == 0 && hourly.train.end == 2550 &&
                         hourly.valid.begin == 2550 && hourly.valid.end == 2700 &&
                         hourly.test.begin == 2700 && hourly.test.end == 2890;
  return {daily_ok && hourly_ok,
          fmt("daily %zu/%zu/%zu, hourly %zu/%zu/%zu", daily.train.length(),
              daily.valid.length(), daily.test.length(), hourly.train.length(),
              hourly.valid.length(), hourly.test.length())};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// two full runs of one config agree byte for byte, timestamps aside; the
// second run overwrites the first in place so the configs really are equal
Outcome check_determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "sc_acceptance_det";
  std::error_code ec;
  fs::remove_all(dir, ec);

  pl::RunConfig cfg;
  cfg.seed = 7;
  cfg.synthetic.length = 400;
  cfg.synthetic.features = 3;
  cfg.window = {8, 2};
  cfg.train.hidden = 8;
  cfg.train.epochs = 3;
  cfg.train.patience = 3;
  cfg.train.learning_rate = 0.05;
  cfg.crps_samples = 50;
  cfg.kde_grid = 64;
  cfg.stress.epsilon = 0.05;
  cfg.stress.iterations = 1;
  cfg.stress.max_windows = 4;
  cfg.stress.sweep_epsilons = {0.0, 0.05};
  cfg.out_dir = dir.string();

  const auto strip_timestamp = [](std::string text) {
    nlohmann::json j = nlohmann::json::parse(text);
    j.erase("generated_at");
    return j.dump(2);
  };

  const pl::RunOutcome first = pl::run_pipeline(cfg);
  std::vector<std::pair<std::string, std::string>> snapshot;
  for (const std::string& rel : first.artifacts) {
    std::string bytes = slurp(dir / rel);
    if (rel == "summary.json") bytes = strip_timestamp(std::move(bytes));
    snapshot.emplace_back(rel, std::move(bytes));
  }

  const pl::RunOutcome second = pl::run_pipeline(cfg);
  if (second.artifacts != first.artifacts) {
    fs::remove_all(dir, ec);
    return {false, "artifact lists differ between runs"};
  }
  std::size_t differing = 0;
  for (const auto& [rel, bytes] : snapshot) {
    std::string again = slurp(dir / rel);
    if (rel == "summary.json") again = strip_timestamp(std::move(again));
    if (again != bytes) ++differing;
  }
  fs::remove_all(dir, ec);
  const bool ok = !snapshot.empty() && differing == 0;
  return {ok, fmt("%zu artifacts compared, %zu differ", snapshot.size(), differing)};
}

}  // namespace

int main() {
  int failures = 0;
  const auto report = [&](int id, const char* name, const Outcome& o) {
    if (!o.ok) ++failures;
    std::printf("%s %2d %s: %s\n", o.ok ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  };
  const auto guarded = [](auto&& body) -> Outcome {
    try {
      return body();
    } catch (const std::exception& e) {
      return {false, std::string("exception: ") + e.what()};
    }
  };

  report(1, "gradient correctness", guarded(check_gradients));
  report(2, "likelihood sanity", guarded(check_likelihood));
  report(3, "perturbation bounds and budget", guarded(check_bounds_budget));
  report(4, "perturbation directionality", guarded(check_directionality));

  std::optional<CoupledRun> coupled;
  std::string build_error;
  try {
    coupled = build_coupled_run();
  } catch (const std::exception& e) {
    build_error = e.what();
  }
  const CoupledRun* coupled_ptr = coupled ? &*coupled : nullptr;

  report(5, "step-size sweep monotonicity",
         guarded([&] { return check_sweep_monotone(coupled_ptr, build_error); }));
  report(6, "trading oracle equivalence", guarded(check_trading_oracle));
  report(7, "metric oracles", guarded(check_metric_oracles));
  report(8, "perturbation mass concentration",
         guarded([&] { return check_feature_mass(coupled_ptr, build_error); }));
  report(9, "split fidelity", guarded(check_split_fidelity));
  report(10, "end-to-end determinism", guarded(check_determinism));

  std::printf("%d/10 checks passed\n", 10 - failures);
  return failures;
}
