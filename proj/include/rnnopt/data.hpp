#pragma once

// Price-series ingestion and preprocessing: Yahoo-format CSV parsing,
// gap repair, chronological splitting, min-max scaling and sliding windows.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rnnopt {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Date = std::chrono::year_month_day;

std::string to_iso(const Date& d);
/// Strict YYYY-MM-DD; returns nullopt for anything else or an invalid day.
std::optional<Date> parse_iso_date(std::string_view text);

/// A parsed but unrepaired series; nullopt marks a missing close.
struct RawPriceSeries {
  std::vector<Date> dates;
  std::vector<std::optional<double>> close;

  std::size_t size() const { return dates.size(); }
  std::size_t missing_count() const;
};

/// Strictly increasing dates, every close present and > 0.
struct PriceSeries {
  std::vector<Date> dates;
  std::vector<double> close;

  std::size_t size() const { return dates.size(); }
};

/// Parses comma-delimited text with a header row holding at least `Date`
/// and `column`. Rows come back sorted by date. Cells that are empty,
/// "null", unparseable or non-positive are recorded as missing. Errors
/// carry the 1-based line number.
RawPriceSeries parse_csv(std::string_view text, std::string_view column = "Close");
RawPriceSeries read_csv_file(const std::filesystem::path& path, std::string_view column = "Close");

/// Fills interior gaps by linear interpolation between the nearest present
/// neighbours. Present values are preserved bit-for-bit.
PriceSeries repair_missing(const RawPriceSeries& raw);

struct ScalerParams {
  double min_x = 0.0;
  double max_x = 1.0;

  double range() const { return max_x - min_x; }
};

/// Extrema of `values`; throws DataError when they coincide.
ScalerParams fit_scaler(std::span<const double> values);

/// (x - min) / (max - min). Not clamped: held-out values may leave [0, 1].
double transform(const ScalerParams& s, double x);
double inverse_transform(const ScalerParams& s, double x_norm);
std::vector<double> transform(const ScalerParams& s, std::span<const double> xs);
std::vector<double> inverse_transform(const ScalerParams& s, std::span<const double> xs);

struct Sample {
  std::vector<double> window;
  double target = 0.0;
};

struct WindowedDataset {
  std::size_t lookback = 0;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

/// Sample k covers positions [k, k + lookback) and targets k + lookback,
/// giving series.size() - lookback samples.
WindowedDataset make_windows(std::span<const double> series, std::size_t lookback);

struct SplitSpec {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
};

/// Parses "0.7,0.15,0.15".
SplitSpec parse_split(std::string_view text);
void validate(const SplitSpec& spec);

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

/// val = floor(val_frac * n), test = floor(test_frac * n), train takes the rest.
SplitSizes split_sizes(std::size_t n, const SplitSpec& spec);

struct Partitions {
  PriceSeries train;
  PriceSeries val;
  PriceSeries test;
};

/// Contiguous train | val | test, earliest first. Throws DataError if any
/// partition is shorter than `min_length`.
Partitions chronological_split(const PriceSeries& series, const SplitSpec& spec,
                               std::size_t min_length);

enum class ScalerMode { TrainOnly, FullSeries };

std::string_view to_string(ScalerMode mode);
ScalerMode parse_scaler_mode(std::string_view name);

struct PrepareOptions {
  std::size_t lookback = 60;
  SplitSpec split;
  ScalerMode scaler_mode = ScalerMode::TrainOnly;
};

struct PreparedData {
  Partitions partitions;
  ScalerParams scaler;
  std::size_t lookback = 0;
  ScalerMode scaler_mode = ScalerMode::TrainOnly;
  WindowedDataset train;
  WindowedDataset val;
  WindowedDataset test;
};

/// Split first, fit the scaler (train partition or whole series), then
/// window each partition on its own so no sample crosses a boundary.
PreparedData prepare(const PriceSeries& series, const PrepareOptions& options);

/// Rebuilds windows from partitions + scaler, as prepare() would.
PreparedData rebuild(Partitions partitions, const ScalerParams& scaler, std::size_t lookback,
                     ScalerMode mode);

/// Persists partitions, scaler and lookback as JSON; load_prepared()
/// rebuilds identical windows, and saving a loaded file reproduces it
/// byte for byte.
void save_prepared(const PreparedData& data, const std::filesystem::path& path,
                   std::string_view source);
PreparedData load_prepared(const std::filesystem::path& path, std::string* source = nullptr);

/// Deterministic sine-plus-trend test series on consecutive business days
/// from 2000-01-03: 100 + 0.1k + 10 sin(2 pi k / 50) + U(-0.5, 0.5).
PriceSeries make_sine_trend_series(std::size_t n, std::uint64_t seed = 7);

/// Date,Close CSV with 17-significant-digit closes.
std::string to_csv(const PriceSeries& series);

}  // namespace rnnopt
