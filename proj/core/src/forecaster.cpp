#include "stresscast/forecaster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "stresscast/autodiff.hpp"
#include "stresscast/errors.hpp"

namespace stresscast::fc {
namespace {

constexpr double kPi = 3.14159265358979323846;

struct FlatLayout {
  std::size_t w_in = 0;
  std::size_t w_h = 0;
  std::size_t b_h = 0;
  std::size_t w_out = 0;
  std::size_t b_out = 0;
  std::size_t total = 0;

  FlatLayout(std::size_t hidden, std::size_t features) {
    w_in = 0;
    w_h = w_in + hidden * (1 + features);
    b_h = w_h + hidden * hidden;
    w_out = b_h + hidden;
    b_out = w_out + 3 * hidden;
    total = b_out + 3;
  }
};

// The plain and taped unrolls below must stay in lockstep: same step order,
// same left-fold summation, so forecasts and gradient-bearing forward values
// agree to the last bit.

struct PlainRun {
  std::vector<StudentTParams> theta;
  std::vector<double> h_after_history;
};

void plain_step(const ModelParams& p, const std::vector<double>& h_prev, double u0,
                const Matrix& x, std::size_t row, std::vector<double>& h_out) {
  const std::size_t hidden = p.hidden;
  const std::size_t n = p.features;
  h_out.resize(hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    double pre = p.b_h[j];
    pre += p.w_in(j, 0) * u0;
    for (std::size_t i = 0; i < n; ++i) pre += p.w_in(j, 1 + i) * x(row, i);
    if (!h_prev.empty()) {
      for (std::size_t l = 0; l < hidden; ++l) pre += p.w_h(j, l) * h_prev[l];
    }
    h_out[j] = std::tanh(pre);
  }
}

StudentTParams plain_head(const ModelParams& p, const std::vector<double>& h) {
  double raw[3];
  for (std::size_t r = 0; r < 3; ++r) {
    raw[r] = p.b_out[r];
    for (std::size_t l = 0; l < p.hidden; ++l) raw[r] += p.w_out(r, l) * h[l];
  }
  StudentTParams out;
  out.mu = raw[0];
  out.sigma = ad::Tape::softplus_fwd(raw[1]) + 1e-6;
  out.nu = ad::Tape::softplus_fwd(raw[2]) + 2.0;
  return out;
}

PlainRun plain_unroll(const ModelParams& p, std::span<const double> z, const Matrix& x,
                      std::size_t horizon) {
  const std::size_t k = z.size();
  PlainRun run;
  run.theta.reserve(horizon);
  std::vector<double> h;
  std::vector<double> hn;
  double mu_prev = 0.0;
  for (std::size_t step = 0; step < k + horizon; ++step) {
    const double u0 = step == 0 ? 0.0 : (step <= k ? z[step - 1] : mu_prev);
    plain_step(p, h, u0, x, std::min(step, k - 1), hn);
    std::swap(h, hn);
    for (double v : h) {
      if (!std::isfinite(v)) {
        throw NumericError("forecaster: non-finite activation at step " +
                           std::to_string(step));
      }
    }
    if (step + 1 == k) run.h_after_history = h;
    if (step >= k) {
      StudentTParams th = plain_head(p, h);
      if (!std::isfinite(th.mu) || !std::isfinite(th.sigma) || !std::isfinite(th.nu)) {
        throw NumericError("forecaster: non-finite output at step " +
                           std::to_string(step));
      }
      mu_prev = th.mu;
      run.theta.push_back(th);
    }
  }
  return run;
}

struct TapedTheta {
  ad::Value mu, sigma, nu;
};

std::vector<TapedTheta> record_unroll(ad::Tape& tape, std::size_t hidden, std::size_t n,
                                      std::span<const ad::Value> flat,
                                      std::span<const ad::Value> z,
                                      std::span<const ad::Value> x,  // k*n, (s, i) row-major
                                      std::size_t horizon) {
  const FlatLayout lay(hidden, n);
  const std::size_t k = z.size();
  std::vector<TapedTheta> theta;
  theta.reserve(horizon);
  std::vector<ad::Value> h;
  std::vector<ad::Value> hn;
  const ad::Value zero = tape.constant(0.0);
  for (std::size_t step = 0; step < k + horizon; ++step) {
    try {
      const ad::Value u0 =
          step == 0 ? zero : (step <= k ? z[step - 1] : theta[step - k - 1].mu);
      const std::size_t row = std::min(step, k - 1);
      hn.clear();
      hn.reserve(hidden);
      for (std::size_t j = 0; j < hidden; ++j) {
        ad::Value pre = flat[lay.b_h + j];
        pre = pre + flat[lay.w_in + j * (1 + n)] * u0;
        for (std::size_t i = 0; i < n; ++i) {
          pre = pre + flat[lay.w_in + j * (1 + n) + 1 + i] * x[row * n + i];
        }
        if (!h.empty()) {
          for (std::size_t l = 0; l < hidden; ++l) {
            pre = pre + flat[lay.w_h + j * hidden + l] * h[l];
          }
        }
        hn.push_back(ad::tanh(pre));
      }
      std::swap(h, hn);
      if (step >= k) {
        ad::Value raw[3];
        for (std::size_t r = 0; r < 3; ++r) {
          raw[r] = flat[lay.b_out + r];
          for (std::size_t l = 0; l < hidden; ++l) {
            raw[r] = raw[r] + flat[lay.w_out + r * hidden + l] * h[l];
          }
        }
        theta.push_back(
            {raw[0], ad::softplus(raw[1]) + 1e-6, ad::softplus(raw[2]) + 2.0});
      }
    } catch (const NumericError& e) {
      throw NumericError("forecaster: non-finite activation at step " +
                         std::to_string(step) + ": " + e.what());
    }
  }
  return theta;
}

ad::Value taped_nll(const TapedTheta& th, double z) {
  const ad::Value t = (z - th.mu) / th.sigma;
  const ad::Value q = ad::square(t) / th.nu;
  return ad::log_gamma(th.nu * 0.5) - ad::log_gamma((th.nu + 1.0) * 0.5) +
         0.5 * ad::log(th.nu * kPi) + ad::log(th.sigma) +
         (th.nu + 1.0) * 0.5 * ad::log(1.0 + q);
}

// Bailey's polar method: one student-T variate with nu degrees of freedom.
double student_t_draw(std::mt19937_64& rng, std::uniform_real_distribution<double>& unif,
                      double nu) {
  double u = 0.0;
  double w = 0.0;
  do {
    u = 2.0 * unif(rng) - 1.0;
    const double v = 2.0 * unif(rng) - 1.0;
    w = u * u + v * v;
  } while (w > 1.0 || w == 0.0);
  return u * std::sqrt(nu * (std::pow(w, -2.0 / nu) - 1.0) / w);
}

std::vector<double> matrix_to_vec(const Matrix& m) { return m.data(); }

Matrix matrix_from_vec(std::size_t rows, std::size_t cols, const std::vector<double>& v,
                       const char* name) {
  if (v.size() != rows * cols) {
    throw DataError(std::string("checkpoint: '") + name + "' has " +
                    std::to_string(v.size()) + " values, expected " +
                    std::to_string(rows * cols));
  }
  Matrix m(rows, cols);
  m.data() = v;
  return m;
}

}  // namespace

std::string to_string(ParamIndex p) {
  switch (p) {
    case ParamIndex::mu: return "mu";
    case ParamIndex::sigma: return "sigma";
    default: return "nu";
  }
}

ParamIndex param_index_from_string(const std::string& s) {
  if (s == "mu") return ParamIndex::mu;
  if (s == "sigma") return ParamIndex::sigma;
  if (s == "nu") return ParamIndex::nu;
  throw ConfigError("unknown distribution parameter '" + s +
                    "' (expected mu, sigma or nu)");
}

double nll(const StudentTParams& d, double z) {
  if (!(d.sigma > 0.0) || !(d.nu > 2.0) || !std::isfinite(d.mu) ||
      !std::isfinite(d.sigma) || !std::isfinite(d.nu)) {
    throw NumericError("nll: parameters violate sigma>0, nu>2");
  }
  const double t = (z - d.mu) / d.sigma;
  return std::lgamma(d.nu * 0.5) - std::lgamma((d.nu + 1.0) * 0.5) +
         0.5 * std::log(d.nu * kPi) + std::log(d.sigma) +
         (d.nu + 1.0) * 0.5 * std::log1p(t * t / d.nu);
}

void ModelParams::validate() const {
  if (hidden < 1 || features < 1) throw DataError("model: hidden and feature counts must be positive");
  if (w_in.rows() != hidden || w_in.cols() != 1 + features ||
      w_h.rows() != hidden || w_h.cols() != hidden || b_h.size() != hidden ||
      w_out.rows() != 3 || w_out.cols() != hidden || b_out.size() != 3) {
    throw DataError("model: weight shapes are inconsistent");
  }
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  if (!finite(w_in.data()) || !finite(w_h.data()) || !finite(b_h) ||
      !finite(w_out.data()) || !finite(b_out)) {
    throw DataError("model: non-finite weight");
  }
}

std::size_t ModelParams::flat_size(std::size_t hidden, std::size_t features) {
  return FlatLayout(hidden, features).total;
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> out;
  out.reserve(flat_size(hidden, features));
  out.insert(out.end(), w_in.data().begin(), w_in.data().end());
  out.insert(out.end(), w_h.data().begin(), w_h.data().end());
  out.insert(out.end(), b_h.begin(), b_h.end());
  out.insert(out.end(), w_out.data().begin(), w_out.data().end());
  out.insert(out.end(), b_out.begin(), b_out.end());
  return out;
}

ModelParams ModelParams::from_flat(std::size_t hidden, std::size_t features,
                                   std::span<const double> flat) {
  const FlatLayout lay(hidden, features);
  if (flat.size() != lay.total) {
    throw DataError("model: flat parameter vector has wrong length");
  }
  ModelParams p;
  p.hidden = hidden;
  p.features = features;
  p.w_in = Matrix(hidden, 1 + features);
  std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(lay.w_in), hidden * (1 + features),
              p.w_in.data().begin());
  p.w_h = Matrix(hidden, hidden);
  std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(lay.w_h), hidden * hidden,
              p.w_h.data().begin());
  p.b_h.assign(flat.begin() + static_cast<std::ptrdiff_t>(lay.b_h),
               flat.begin() + static_cast<std::ptrdiff_t>(lay.b_h + hidden));
  p.w_out = Matrix(3, hidden);
  std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(lay.w_out), 3 * hidden,
              p.w_out.data().begin());
  p.b_out.assign(flat.begin() + static_cast<std::ptrdiff_t>(lay.b_out),
                 flat.begin() + static_cast<std::ptrdiff_t>(lay.b_out + 3));
  return p;
}

ModelParams init_params(std::uint64_t seed, std::size_t hidden, std::size_t features) {
  if (hidden < 1 || features < 1) {
    throw ConfigError("init_params: hidden and feature counts must be at least 1");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  ModelParams p;
  p.hidden = hidden;
  p.features = features;
  const double s_in = 1.0 / std::sqrt(static_cast<double>(1 + features));
  const double s_h = 1.0 / std::sqrt(static_cast<double>(hidden));
  p.w_in = Matrix(hidden, 1 + features);
  for (double& w : p.w_in.data()) w = unif(rng) * s_in;
  p.w_h = Matrix(hidden, hidden);
  for (double& w : p.w_h.data()) w = unif(rng) * s_h;
  p.b_h.assign(hidden, 0.0);
  p.w_out = Matrix(3, hidden);
  for (double& w : p.w_out.data()) w = unif(rng) * s_h;
  p.b_out.assign(3, 0.0);
  return p;
}

void TrainConfig::validate() const {
  if (hidden < 1) throw ConfigError("train: hidden size must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning rate must be positive");
  if (epochs < 1) throw ConfigError("train: epochs must be at least 1");
  if (patience < 1) throw ConfigError("train: patience must be at least 1");
  if (weight_decay < 0.0) throw ConfigError("train: weight decay must be non-negative");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("train: dropout must lie in [0,1)");
}

std::pair<ModelParams, TrainLog> train(const std::vector<ts::Window>& train_windows,
                                       const std::vector<ts::Window>& valid_windows,
                                       const TrainConfig& cfg) {
  cfg.validate();
  if (train_windows.empty() || valid_windows.empty()) {
    throw DataError("train: needs non-empty training and validation window sets");
  }
  const std::size_t k = train_windows.front().z_history.size();
  const std::size_t tau = train_windows.front().z_future.size();
  const std::size_t n = train_windows.front().covariates.cols();
  auto check_window = [&](const ts::Window& w) {
    if (w.z_history.size() != k || w.z_future.size() != tau ||
        w.covariates.rows() != k || w.covariates.cols() != n) {
      throw DataError("train: window shapes are inconsistent");
    }
  };
  for (const auto& w : train_windows) check_window(w);
  for (const auto& w : valid_windows) check_window(w);

  const FlatLayout lay(cfg.hidden, n);
  auto is_bias = [&](std::size_t i) {
    return (i >= lay.b_h && i < lay.b_h + cfg.hidden) || i >= lay.b_out;
  };
  auto eval = [&](std::span<const double> flat, const std::vector<ts::Window>& ws) {
    const ModelParams p = ModelParams::from_flat(cfg.hidden, n, flat);
    double acc = 0.0;
    for (const auto& w : ws) {
      const PlainRun run = plain_unroll(p, w.z_history, w.covariates, tau);
      double wacc = 0.0;
      for (std::size_t q = 0; q < tau; ++q) wacc += nll(run.theta[q], w.z_future[q]);
      acc += wacc / static_cast<double>(tau);
    }
    return acc / static_cast<double>(ws.size());
  };

  std::vector<double> flat = init_params(cfg.seed, cfg.hidden, n).flatten();
  TrainLog log;
  log.best_epoch = 0;
  log.best_valid_nll = eval(flat, valid_windows);
  std::vector<double> best = flat;
  std::size_t stale = 0;

  std::mt19937_64 drop_rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 0x6A09E667F3BCC909ULL);
  std::bernoulli_distribution keep(1.0 - cfg.dropout);
  const double keep_scale = cfg.dropout > 0.0 ? 1.0 / (1.0 - cfg.dropout) : 1.0;

  ad::Tape tape;
  std::vector<double> grad(lay.total);
  std::vector<ad::Value> pv;
  std::vector<ad::Value> zv;
  std::vector<ad::Value> xv;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss_acc = 0.0;
    for (const auto& w : train_windows) {
      tape.clear();
      pv = tape.vars(flat);
      zv.clear();
      for (double z : w.z_history) zv.push_back(tape.constant(z));
      xv.clear();
      xv.reserve(k * n);
      for (std::size_t s = 0; s < k; ++s) {
        for (std::size_t i = 0; i < n; ++i) {
          double v = w.covariates(s, i);
          if (cfg.dropout > 0.0) v = keep(drop_rng) ? v * keep_scale : 0.0;
          xv.push_back(tape.constant(v));
        }
      }
      const auto theta = record_unroll(tape, cfg.hidden, n, pv, zv, xv, tau);
      ad::Value loss = taped_nll(theta[0], w.z_future[0]);
      for (std::size_t q = 1; q < tau; ++q) loss = loss + taped_nll(theta[q], w.z_future[q]);
      loss = loss * (1.0 / static_cast<double>(tau));
      const ad::GradientMap g = tape.backward(loss);
      for (std::size_t i = 0; i < lay.total; ++i) grad[i] += g.at(pv[i]);
      loss_acc += tape.value(loss);
    }
    const double count = static_cast<double>(train_windows.size());
    loss_acc /= count;
    if (!std::isfinite(loss_acc)) {
      throw NumericError("train: diverged at epoch " + std::to_string(epoch));
    }
    for (std::size_t i = 0; i < lay.total; ++i) {
      const double gi =
          grad[i] / count + (is_bias(i) ? 0.0 : cfg.weight_decay * flat[i]);
      if (!std::isfinite(gi)) {
        throw NumericError("train: diverged at epoch " + std::to_string(epoch));
      }
      flat[i] -= cfg.learning_rate * gi;
    }
    log.train_nll.push_back(loss_acc);
    const double v = eval(flat, valid_windows);
    if (!std::isfinite(v)) {
      throw NumericError("train: diverged at epoch " + std::to_string(epoch));
    }
    log.valid_nll.push_back(v);
    if (v < log.best_valid_nll) {
      log.best_valid_nll = v;
      log.best_epoch = epoch;
      best = flat;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  return {ModelParams::from_flat(cfg.hidden, n, best), log};
}

RnnForecaster::RnnForecaster(ModelParams params, ts::WindowSpec window, std::uint64_t seed)
    : params_(std::move(params)), window_(window), seed_(seed) {
  params_.validate();
  if (window_.history < 1 || window_.horizon < 1) {
    throw ConfigError("forecaster: history and horizon must be at least 1");
  }
}

namespace {
void check_shapes(const ModelParams& p, const ts::WindowSpec& w,
                  std::span<const double> z, const Matrix& x) {
  if (z.size() != w.history || x.rows() != w.history || x.cols() != p.features) {
    throw DataError("forecaster: window shape mismatch (expected history " +
                    std::to_string(w.history) + ", features " +
                    std::to_string(p.features) + ")");
  }
}
}  // namespace

ForecastDistribution RnnForecaster::forecast(std::span<const double> z_history,
                                             const Matrix& x_window) const {
  check_shapes(params_, window_, z_history, x_window);
  ForecastDistribution dist;
  dist.steps = plain_unroll(params_, z_history, x_window, window_.horizon).theta;
  return dist;
}

Matrix RnnForecaster::input_gradient(std::span<const double> z_history,
                                     const Matrix& x_window, ParamIndex p,
                                     std::size_t t) const {
  check_shapes(params_, window_, z_history, x_window);
  if (t >= window_.horizon) {
    throw ConfigError("forecaster: horizon step " + std::to_string(t) +
                      " out of range for horizon " + std::to_string(window_.horizon));
  }
  const std::size_t k = window_.history;
  const std::size_t n = params_.features;
  const std::size_t hidden = params_.hidden;
  const std::size_t steps = k + window_.horizon;
  ad::Tape tape;
  tape.reserve(steps * hidden * (2 * n + 2 * hidden + 8) + FlatLayout(hidden, n).total +
               k * (n + 1) + 64);

  const std::vector<double> flat = params_.flatten();
  std::vector<ad::Value> pv;
  pv.reserve(flat.size());
  for (double v : flat) pv.push_back(tape.constant(v));
  std::vector<ad::Value> zv;
  zv.reserve(k);
  for (double z : z_history) zv.push_back(tape.constant(z));
  std::vector<ad::Value> xv;
  xv.reserve(k * n);
  for (std::size_t s = 0; s < k; ++s) {
    for (std::size_t i = 0; i < n; ++i) xv.push_back(tape.var(x_window(s, i)));
  }
  const auto theta = record_unroll(tape, hidden, n, pv, zv, xv, window_.horizon);
  const ad::Value target = p == ParamIndex::mu      ? theta[t].mu
                           : p == ParamIndex::sigma ? theta[t].sigma
                                                    : theta[t].nu;
  const ad::GradientMap g = tape.backward(target);
  Matrix out(k, n);
  for (std::size_t s = 0; s < k; ++s) {
    for (std::size_t i = 0; i < n; ++i) out(s, i) = g.at(xv[s * n + i]);
  }
  return out;
}

Matrix RnnForecaster::sample_paths(std::span<const double> z_history, const Matrix& x_window,
                                   std::size_t n_samples, std::uint64_t seed) const {
  if (n_samples < 1) throw ConfigError("sample_paths: n_samples must be at least 1");
  check_shapes(params_, window_, z_history, x_window);
  const std::size_t k = window_.history;
  const PlainRun base = plain_unroll(params_, z_history, x_window, 0);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix out(n_samples, window_.horizon);
  std::vector<double> h;
  std::vector<double> hn;
  for (std::size_t s = 0; s < n_samples; ++s) {
    h = base.h_after_history;
    double prev = z_history[k - 1];
    for (std::size_t q = 0; q < window_.horizon; ++q) {
      plain_step(params_, h, prev, x_window, k - 1, hn);
      std::swap(h, hn);
      const StudentTParams th = plain_head(params_, h);
      if (!std::isfinite(th.mu) || !std::isfinite(th.sigma) || !std::isfinite(th.nu)) {
        throw NumericError("sample_paths: non-finite output at step " + std::to_string(q));
      }
      const double draw = th.mu + th.sigma * student_t_draw(rng, unif, th.nu);
      out(s, q) = draw;
      prev = draw;
    }
  }
  return out;
}

std::string RnnForecaster::to_json() const {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["kind"] = "forecaster-checkpoint";
  j["hidden"] = params_.hidden;
  j["features"] = params_.features;
  j["history"] = window_.history;
  j["horizon"] = window_.horizon;
  j["seed"] = seed_;
  j["w_in"] = matrix_to_vec(params_.w_in);
  j["w_h"] = matrix_to_vec(params_.w_h);
  j["b_h"] = params_.b_h;
  j["w_out"] = matrix_to_vec(params_.w_out);
  j["b_out"] = params_.b_out;
  return j.dump(2) + "\n";
}

RnnForecaster RnnForecaster::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("checkpoint: invalid JSON: ") + e.what());
  }
  try {
    if (j.value("kind", "") != "forecaster-checkpoint") {
      throw DataError("checkpoint: missing or wrong 'kind' field");
    }
    if (j.value("schema_version", 0) != 1) {
      throw DataError("checkpoint: unsupported schema_version");
    }
    ModelParams p;
    p.hidden = j.at("hidden").get<std::size_t>();
    p.features = j.at("features").get<std::size_t>();
    p.w_in = matrix_from_vec(p.hidden, 1 + p.features,
                             j.at("w_in").get<std::vector<double>>(), "w_in");
    p.w_h = matrix_from_vec(p.hidden, p.hidden, j.at("w_h").get<std::vector<double>>(),
                            "w_h");
    p.b_h = j.at("b_h").get<std::vector<double>>();
    p.w_out = matrix_from_vec(3, p.hidden, j.at("w_out").get<std::vector<double>>(),
                              "w_out");
    p.b_out = j.at("b_out").get<std::vector<double>>();
    ts::WindowSpec w;
    w.history = j.at("history").get<std::size_t>();
    w.horizon = j.at("horizon").get<std::size_t>();
    return RnnForecaster(std::move(p), w, j.value("seed", std::uint64_t{0}));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: malformed field: ") + e.what());
  }
}

void RnnForecaster::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot open '" + path + "' for writing");
  out << to_json();
  if (!out) throw DataError("checkpoint: write to '" + path + "' failed");
}

RnnForecaster RnnForecaster::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

}  // namespace stresscast::fc
