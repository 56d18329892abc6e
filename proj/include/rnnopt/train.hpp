#pragma once

// Batch-size-1 training loop with per-epoch loss records and the
// convergence-speed / stability summaries used by the benchmark.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rnnopt/cells.hpp"
#include "rnnopt/data.hpp"
#include "rnnopt/optim.hpp"

namespace rnnopt {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  CellKind cell = CellKind::Gru;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::size_t epochs = 10;
  std::size_t hidden = 50;
  OptimizerHyperparams hyper;
  std::uint64_t seed = 1;
  double threshold = 1e-3;  // normalized MSE for convergence_speed
  bool shuffle = false;     // seeded per-epoch shuffle; off reproduces chronological order
  double clip_norm = 0.0;   // global-norm clipping; 0 disables
};

/// Throws std::invalid_argument naming the offending field.
void validate(const TrainConfig& config);

/// "lstm-adam", "gru-nag", ...
std::string config_label(CellKind cell, OptimizerKind optimizer);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

struct Stability {
  std::size_t increases = 0;    // epochs whose loss rose over the previous epoch
  double total_increase = 0.0;  // sum of those rises
};

struct RunResult {
  TrainConfig config;
  std::vector<EpochRecord> epochs;
  Model model;
  std::optional<std::size_t> epochs_to_threshold;
  Stability stability;
  double wall_clock_s = 0.0;
  std::uint64_t gradient_evaluations = 0;
};

double mse_loss(double prediction, double target);
/// d/d(prediction) of mse_loss.
double mse_loss_derivative(double prediction, double target);

struct LossAndGradient {
  double loss = 0.0;
  Gradients grads;
};

LossAndGradient loss_and_gradient(const Model& model, const Sample& sample);

/// Scales `grads` down so its global L2 norm is at most max_norm.
void clip_by_norm(Gradients& grads, double max_norm);

struct EpochOptions {
  std::size_t epoch = 1;         // for diagnostics
  Rng* shuffle_rng = nullptr;    // non-null enables shuffling
  double clip_norm = 0.0;
  std::uint64_t* gradient_evaluations = nullptr;  // incremented per forward+backward
};

/// One pass of per-sample updates. The returned mean loss is measured at
/// the parameters each sample saw before its update. Throws TrainingError
/// on a non-finite loss, naming epoch and sample index.
double train_epoch(Model& model, Optimizer& optimizer, const WindowedDataset& data,
                   const EpochOptions& options = {});

/// Mean MSE over the dataset; forward passes only.
double evaluate(const Model& model, const WindowedDataset& data);

/// Scalar prediction for one window of normalized values.
double predict(const Model& model, std::span<const double> window);

using ProgressFn = std::function<void(const TrainConfig&, const EpochRecord&)>;

/// Initializes a model from config.seed and trains it for config.epochs.
/// `record_timing` = false leaves every duration at 0 so results are
/// bit-reproducible.
RunResult fit(const TrainConfig& config, const WindowedDataset& train, const WindowedDataset& val,
              const ProgressFn& progress = {}, bool record_timing = true);

/// 1-based index of the first epoch with train loss <= threshold.
std::optional<std::size_t> convergence_speed(std::span<const EpochRecord> records, double threshold);
std::optional<std::size_t> convergence_speed(std::span<const double> losses, double threshold);

Stability stability_score(std::span<const EpochRecord> records);
Stability stability_score(std::span<const double> losses);

}  // namespace rnnopt
