#pragma once

// Test-set scoring and the benchmark report: RMSE in price units, result
// rows in a fixed order, per-epoch curves, and byte-stable CSV/JSON export.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rnnopt/data.hpp"
#include "rnnopt/train.hpp"

namespace rnnopt {

/// sqrt(mean((p - t)^2)); throws on empty or unequal inputs.
double rmse(std::span<const double> predictions, std::span<const double> targets);

/// One-step-ahead forecasts for every window, mapped back to price units.
std::vector<double> predict_series(const Model& model, const ScalerParams& scaler,
                                   const WindowedDataset& data);
std::vector<double> denormalized_targets(const ScalerParams& scaler, const WindowedDataset& data);

struct TestMetrics {
  double rmse_price = 0.0;
  double rmse_normalized = 0.0;
  std::size_t samples = 0;
};

TestMetrics test_metrics(const Model& model, const ScalerParams& scaler, const WindowedDataset& test);

struct RunOutcome {
  RunResult run;
  TestMetrics test;
};

struct ReportRow {
  std::string config;
  CellKind cell = CellKind::Lstm;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::optional<std::uint64_t> seed;  // empty on median rows
  bool median = false;
  double final_train_loss = 0.0;
  double final_val_loss = 0.0;
  double rmse = 0.0;  // price units
  double rmse_normalized = 0.0;
  std::optional<double> epochs_to_threshold;
  double stability_count = 0.0;
  double stability_sum = 0.0;
  double wall_clock_s = 0.0;
  std::vector<EpochRecord> epochs;
};

struct ReportMetadata {
  std::string dataset;
  std::size_t lookback = 0;
  std::size_t hidden = 0;
  std::size_t epochs = 0;
  std::size_t batch_size = 1;
  OptimizerHyperparams hyper;
  double threshold = 0.0;
  std::string scaler_mode;
  ScalerParams scaler;
  SplitSizes points;
  SplitSizes windows;
  std::vector<std::uint64_t> seeds;
  bool timing_recorded = true;
};

struct BenchmarkReport {
  ReportMetadata meta;
  std::vector<ReportRow> rows;
};

/// Rows sorted LSTM before GRU, then Adam, NAG, momentum, then seed. When
/// any configuration ran under more than one seed, rows are labelled
/// "<cell>-<opt>-seed<N>" and each configuration gains a "<cell>-<opt>-median"
/// row built from per-field medians.
BenchmarkReport build_report(const std::vector<RunOutcome>& runs, ReportMetadata meta);

/// Natural log of each loss; a loss of exactly 0 yields nullopt. Throws on
/// negative or non-finite input.
std::vector<std::optional<double>> log_losses(std::span<const double> losses);

/// configurations x epochs train-loss matrix, row order as in the report.
std::vector<std::vector<double>> loss_matrix(const BenchmarkReport& report);

inline constexpr const char* kReportCsvHeader =
    "config,cell,optimizer,final_train_loss,final_val_loss,rmse,epochs_to_threshold,"
    "stability_count,stability_sum,wall_clock_s";
inline constexpr const char* kCurvesCsvHeader = "config,epoch,train_loss,val_loss";

std::string report_csv(const BenchmarkReport& report);
std::string curves_csv(const BenchmarkReport& report);
nlohmann::json report_json(const BenchmarkReport& report);
BenchmarkReport report_from_json(const nlohmann::json& j);

/// "LSTM Adam", "GRU NAG", ...
std::string display_name(CellKind cell, OptimizerKind optimizer);

/// Plain-text RMSE table in report row order.
std::string format_table(const BenchmarkReport& report);

enum class ExportFormat { Csv, Json, Both };
ExportFormat parse_export_format(std::string_view name);

/// Writes report.csv + curves.csv and/or report.json into `dir`; returns
/// the paths written.
std::vector<std::filesystem::path> export_report(const BenchmarkReport& report, ExportFormat format,
                                                 const std::filesystem::path& dir);

}  // namespace rnnopt
