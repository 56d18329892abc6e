#include "rnnopt/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <utility>

namespace rnnopt {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void copy_blocks(std::span<const ConstBlockView> from, std::span<const BlockView> to) {
  for (std::size_t b = 0; b < to.size(); ++b) {
    std::copy(from[b].values.begin(), from[b].values.end(), to[b].values.begin());
  }
}

// Fixed odd constant so the shuffle stream differs from the init stream.
constexpr std::uint64_t kShuffleSalt = 0x5851f42d4c957f2dULL;

}  // namespace

void validate(const TrainConfig& config) {
  if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (config.hidden < 1) throw std::invalid_argument("hidden must be >= 1");
  // optimizers accept lr = 0 (a frozen run); a training run must move
  if (!(config.hyper.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (!(config.threshold >= 0.0)) throw std::invalid_argument("threshold must be >= 0");
  if (!(config.clip_norm >= 0.0)) throw std::invalid_argument("clip_norm must be >= 0");
  validate(config.optimizer, config.hyper);
}

std::string config_label(CellKind cell, OptimizerKind optimizer) {
  return std::string(to_string(cell)) + "-" + std::string(to_string(optimizer));
}

double mse_loss(double prediction, double target) {
  const double d = prediction - target;
  return d * d;
}

double mse_loss_derivative(double prediction, double target) {
  return 2.0 * (prediction - target);
}

double predict(const Model& model, std::span<const double> window) {
  return forward_sequence(model, to_inputs(window)).prediction;
}

LossAndGradient loss_and_gradient(const Model& model, const Sample& sample) {
  const ForwardResult fwd = forward_sequence(model, to_inputs(sample.window));
  LossAndGradient out;
  out.loss = mse_loss(fwd.prediction, sample.target);
  out.grads =
      backward_sequence(model, fwd.cache, mse_loss_derivative(fwd.prediction, sample.target));
  return out;
}

void clip_by_norm(Gradients& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const auto& b : blocks(std::as_const(grads))) {
    for (double g : b.values) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double k = max_norm / norm;
  for (auto& b : blocks(grads)) {
    for (double& g : b.values) g *= k;
  }
}

double train_epoch(Model& model, Optimizer& optimizer, const WindowedDataset& data,
                   const EpochOptions& options) {
  if (data.empty()) throw std::invalid_argument("train_epoch: empty dataset");

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (options.shuffle_rng != nullptr) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[options.shuffle_rng->below(i)]);
    }
  }

  Model probe = model;
  auto probe_blocks = blocks(probe);
  auto count = [&] {
    if (options.gradient_evaluations != nullptr) ++*options.gradient_evaluations;
  };

  double total = 0.0;
  for (std::size_t idx : order) {
    const Sample& sample = data.samples[idx];
    LossAndGradient lg = loss_and_gradient(model, sample);
    count();
    if (!std::isfinite(lg.loss)) {
      throw TrainingError("non-finite loss at epoch " + std::to_string(options.epoch) +
                          ", sample " + std::to_string(idx));
    }
    total += lg.loss;
    clip_by_norm(lg.grads, options.clip_norm);

    const GradFn grad_fn = [&](std::span<const ConstBlockView> theta,
                               std::span<const BlockView> grad_out) {
      copy_blocks(theta, probe_blocks);
      LossAndGradient shifted = loss_and_gradient(probe, sample);
      count();
      clip_by_norm(shifted.grads, options.clip_norm);
      copy_blocks(blocks(std::as_const(shifted.grads)), grad_out);
    };

    auto theta = blocks(model);
    const auto grad = blocks(std::as_const(lg.grads));
    try {
      optimizer.step(theta, grad, grad_fn);
    } catch (const OptimizerError& e) {
      throw TrainingError("epoch " + std::to_string(options.epoch) + ", sample " +
                          std::to_string(idx) + ": " + e.what());
    }
  }
  return total / static_cast<double>(data.size());
}

double evaluate(const Model& model, const WindowedDataset& data) {
  if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
  double total = 0.0;
  for (const Sample& s : data.samples) total += mse_loss(predict(model, s.window), s.target);
  return total / static_cast<double>(data.size());
}

RunResult fit(const TrainConfig& config, const WindowedDataset& train, const WindowedDataset& val,
              const ProgressFn& progress, bool record_timing) {
  validate(config);
  if (train.empty() || val.empty()) throw std::invalid_argument("fit: empty train or validation set");

  const auto run_start = Clock::now();
  RunResult result;
  result.config = config;
  Rng init_rng(config.seed);
  result.model = init_model(config.cell, 1, config.hidden, init_rng);
  Rng shuffle_rng(config.seed ^ kShuffleSalt);
  auto optimizer = make_optimizer(config.optimizer, config.hyper);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    EpochOptions opts;
    opts.epoch = epoch;
    opts.shuffle_rng = config.shuffle ? &shuffle_rng : nullptr;
    opts.clip_norm = config.clip_norm;
    opts.gradient_evaluations = &result.gradient_evaluations;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_epoch(result.model, *optimizer, train, opts);
    rec.val_loss = evaluate(result.model, val);
    if (!std::isfinite(rec.val_loss)) {
      throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    rec.seconds = record_timing ? seconds_since(epoch_start) : 0.0;
    result.epochs.push_back(rec);
    if (progress) progress(config, rec);
  }

  result.epochs_to_threshold = convergence_speed(result.epochs, config.threshold);
  result.stability = stability_score(result.epochs);
  result.wall_clock_s = record_timing ? seconds_since(run_start) : 0.0;
  return result;
}

std::optional<std::size_t> convergence_speed(std::span<const double> losses, double threshold) {
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (losses[i] <= threshold) return i + 1;
  }
  return std::nullopt;
}

std::optional<std::size_t> convergence_speed(std::span<const EpochRecord> records, double threshold) {
  std::vector<double> losses;
  losses.reserve(records.size());
  for (const auto& r : records) losses.push_back(r.train_loss);
  return convergence_speed(losses, threshold);
}

Stability stability_score(std::span<const double> losses) {
  Stability s;
  for (std::size_t i = 1; i < losses.size(); ++i) {
    const double rise = losses[i] - losses[i - 1];
    if (rise > 0.0) {
      ++s.increases;
      s.total_increase += rise;
    }
  }
  return s;
}

Stability stability_score(std::span<const EpochRecord> records) {
  std::vector<double> losses;
  losses.reserve(records.size());
  for (const auto& r : records) losses.push_back(r.train_loss);
  return stability_score(losses);
}

}  // namespace rnnopt
