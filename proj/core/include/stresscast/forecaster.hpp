#pragma once
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stresscast/forecast.hpp"
#include "stresscast/matrix.hpp"
#include "stresscast/timeseries.hpp"

namespace stresscast::fc {

// Weights of the single-layer tanh recurrent cell plus the projection that
// maps the hidden state to the three raw distribution outputs.
struct ModelParams {
  std::size_t hidden = 0;
  std::size_t features = 0;
  Matrix w_in;               // hidden x (1 + features); column 0 is the lagged target
  Matrix w_h;                // hidden x hidden
  std::vector<double> b_h;   // hidden
  Matrix w_out;              // 3 x hidden
  std::vector<double> b_out; // 3

  void validate() const;  // shapes consistent, every entry finite

  static std::size_t flat_size(std::size_t hidden, std::size_t features);
  std::vector<double> flatten() const;
  static ModelParams from_flat(std::size_t hidden, std::size_t features,
                               std::span<const double> flat);
};

// Uniform weights scaled by 1/sqrt(fan-in), zero biases.
ModelParams init_params(std::uint64_t seed, std::size_t hidden, std::size_t features);

struct TrainConfig {
  std::size_t hidden = 32;
  double learning_rate = 0.05;
  std::size_t epochs = 200;
  std::size_t patience = 20;
  double weight_decay = 1e-4;
  double dropout = 0.0;  // covariate-input dropout probability, training only
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainLog {
  std::vector<double> train_nll;  // mean window NLL per epoch, before the step
  std::vector<double> valid_nll;  // after the step
  std::size_t best_epoch = 0;     // 0 means the initial parameters won
  double best_valid_nll = std::numeric_limits<double>::infinity();
};

// Full-batch gradient descent on the mean horizon NLL with weight decay and
// covariate dropout. Keeps the parameters with the best validation NLL and
// stops once validation fails to improve for cfg.patience epochs.
std::pair<ModelParams, TrainLog> train(const std::vector<ts::Window>& train_windows,
                                       const std::vector<ts::Window>& valid_windows,
                                       const TrainConfig& cfg);

class RnnForecaster final : public ForecastModel {
 public:
  RnnForecaster(ModelParams params, ts::WindowSpec window, std::uint64_t seed = 0);

  std::size_t history() const override { return window_.history; }
  std::size_t horizon() const override { return window_.horizon; }
  std::size_t feature_count() const override { return params_.features; }

  ForecastDistribution forecast(std::span<const double> z_history,
                                const Matrix& x_window) const override;
  Matrix input_gradient(std::span<const double> z_history, const Matrix& x_window,
                        ParamIndex p, std::size_t t) const override;

  // n_samples x horizon draws; each step's draw feeds the next step's lagged
  // target input.
  Matrix sample_paths(std::span<const double> z_history, const Matrix& x_window,
                      std::size_t n_samples, std::uint64_t seed) const;

  const ModelParams& params() const { return params_; }
  const ts::WindowSpec& window() const { return window_; }
  std::uint64_t seed() const { return seed_; }

  // Versioned JSON checkpoint; doubles survive the round trip bit-exactly.
  std::string to_json() const;
  static RnnForecaster from_json(const std::string& text);
  void save(const std::string& path) const;
  static RnnForecaster load(const std::string& path);

 private:
  ModelParams params_;
  ts::WindowSpec window_;
  std::uint64_t seed_ = 0;
};

}  // namespace stresscast::fc
