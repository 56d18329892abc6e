#include "rnnopt/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <optional>
#include <thread>

namespace rnnopt {

BenchmarkOutcome run_benchmark(const PreparedData& data, const BenchmarkOptions& options,
                               const ProgressFn& progress) {
  std::vector<TrainConfig> jobs;
  for (CellKind cell : options.cells) {
    for (OptimizerKind opt : options.optimizers) {
      for (std::uint64_t seed : options.seeds) {
        TrainConfig c = options.base;
        c.cell = cell;
        c.optimizer = opt;
        c.seed = seed;
        validate(c);
        jobs.push_back(c);
      }
    }
  }

  std::vector<std::optional<RunOutcome>> done(jobs.size());
  std::vector<std::optional<BenchmarkFailure>> failed(jobs.size());
  std::mutex progress_mutex;
  const ProgressFn serialized = [&](const TrainConfig& c, const EpochRecord& r) {
    if (!progress) return;
    std::lock_guard lock(progress_mutex);
    progress(c, r);
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const TrainConfig& c = jobs[i];
      try {
        RunResult run = fit(c, data.train, data.val, serialized, options.record_timing);
        TestMetrics test = test_metrics(run.model, data.scaler, data.test);
        done[i] = RunOutcome{std::move(run), test};
      } catch (const std::exception& e) {
        failed[i] = BenchmarkFailure{config_label(c.cell, c.optimizer), c.seed, e.what()};
      }
    }
  };

  const std::size_t n_workers = std::clamp<std::size_t>(options.jobs, 1, std::max<std::size_t>(jobs.size(), 1));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }

  BenchmarkOutcome out;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (done[i]) out.runs.push_back(std::move(*done[i]));
    if (failed[i]) out.failures.push_back(std::move(*failed[i]));
  }
  return out;
}

ReportMetadata make_metadata(const std::string& dataset, const PreparedData& data,
                             const BenchmarkOptions& options) {
  ReportMetadata m;
  m.dataset = dataset;
  m.lookback = data.lookback;
  m.hidden = options.base.hidden;
  m.epochs = options.base.epochs;
  m.batch_size = 1;
  m.hyper = options.base.hyper;
  m.threshold = options.base.threshold;
  m.scaler_mode = std::string(to_string(data.scaler_mode));
  m.scaler = data.scaler;
  m.points = {data.partitions.train.size(), data.partitions.val.size(), data.partitions.test.size()};
  m.windows = {data.train.size(), data.val.size(), data.test.size()};
  m.seeds = options.seeds;
  m.timing_recorded = options.record_timing;
  return m;
}

}  // namespace rnnopt
