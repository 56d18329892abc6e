#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rnnopt/data.hpp"
#include "rnnopt/eval.hpp"
#include "rnnopt/train.hpp"

namespace rnnopt {

struct BenchmarkOptions {
  TrainConfig base;  // cell / optimizer / seed are overridden per run
  std::vector<std::uint64_t> seeds{1};
  std::vector<CellKind> cells{CellKind::Lstm, CellKind::Gru};
  std::vector<OptimizerKind> optimizers{OptimizerKind::Adam, OptimizerKind::Nag};
  std::size_t jobs = 1;
  bool record_timing = true;
};

struct BenchmarkFailure {
  std::string config;
  std::uint64_t seed = 0;
  std::string message;
};

struct BenchmarkOutcome {
  std::vector<RunOutcome> runs;  // completed runs, in job order
  std::vector<BenchmarkFailure> failures;
};

/// Runs every (cell, optimizer, seed) combination. Each run owns its model
/// and optimizer, so jobs > 1 runs them on worker threads; results are
/// collected per slot and come back in the same order regardless of
/// scheduling. A failing run is recorded and the rest still complete.
/// `progress` may be called from several threads at once but calls are
/// serialized.
BenchmarkOutcome run_benchmark(const PreparedData& data, const BenchmarkOptions& options,
                               const ProgressFn& progress = {});

ReportMetadata make_metadata(const std::string& dataset, const PreparedData& data,
                             const BenchmarkOptions& options);

}  // namespace rnnopt
