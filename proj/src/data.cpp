#include "rnnopt/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "rnnopt/format.hpp"
#include "rnnopt/linalg.hpp"

namespace rnnopt {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_price(std::string_view cell) {
  if (cell.empty() || cell == "null" || cell == "NaN" || cell == "nan") return std::nullopt;
  try {
    const double v = parse_double(cell);
    if (!std::isfinite(v) || v <= 0.0) return std::nullopt;
    return v;
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
}

std::string line_prefix(std::size_t line) {
  return "line " + std::to_string(line) + ": ";
}

}  // namespace

std::string to_iso(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

std::optional<Date> parse_iso_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  auto number = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
    int v = 0;
    const char* first = text.data() + pos;
    const auto res = std::from_chars(first, first + len, v);
    if (res.ec != std::errc() || res.ptr != first + len) return std::nullopt;
    return v;
  };
  const auto y = number(0, 4);
  const auto m = number(5, 2);
  const auto d = number(8, 2);
  if (!y || !m || !d || *m < 1 || *d < 1) return std::nullopt;
  const Date date{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
                  std::chrono::day{static_cast<unsigned>(*d)}};
  if (!date.ok()) return std::nullopt;
  return date;
}

std::size_t RawPriceSeries::missing_count() const {
  return static_cast<std::size_t>(
      std::count_if(close.begin(), close.end(), [](const auto& v) { return !v.has_value(); }));
}

RawPriceSeries parse_csv(std::string_view text, std::string_view column) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);

  struct Row {
    Date date;
    std::optional<double> close;
    std::size_t line;
  };
  std::vector<Row> rows;

  std::optional<std::size_t> date_col;
  std::optional<std::size_t> close_col;
  std::size_t header_width = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line = trim(text.substr(pos, nl == std::string_view::npos ? nl : nl - pos));
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (line.empty()) continue;

    const auto fields = split_fields(line);
    if (!date_col) {
      header_width = fields.size();
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i] == "Date") date_col = i;
        if (fields[i] == column) close_col = i;
      }
      if (!date_col) throw DataError(line_prefix(line_no) + "missing required column 'Date'");
      if (!close_col) {
        throw DataError(line_prefix(line_no) + "missing required column '" + std::string(column) + "'");
      }
      continue;
    }
    if (fields.size() != header_width) {
      throw DataError(line_prefix(line_no) + "expected " + std::to_string(header_width) +
                      " fields, found " + std::to_string(fields.size()));
    }
    const auto date = parse_iso_date(fields[*date_col]);
    if (!date) {
      throw DataError(line_prefix(line_no) + "invalid date '" + std::string(fields[*date_col]) +
                      "' (expected YYYY-MM-DD)");
    }
    rows.push_back({*date, parse_price(fields[*close_col]), line_no});
  }

  if (!date_col) throw DataError("empty input: no header row");
  if (rows.empty()) throw DataError("no data rows");

  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.date < b.date; });
  RawPriceSeries out;
  out.dates.reserve(rows.size());
  out.close.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].date == rows[i - 1].date) {
      throw DataError(line_prefix(rows[i].line) + "duplicate date " + to_iso(rows[i].date) +
                      " (first seen on line " + std::to_string(rows[i - 1].line) + ")");
    }
    out.dates.push_back(rows[i].date);
    out.close.push_back(rows[i].close);
  }
  return out;
}

RawPriceSeries read_csv_file(const std::filesystem::path& path, std::string_view column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_csv(buf.str(), column);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

PriceSeries repair_missing(const RawPriceSeries& raw) {
  const std::size_t n = raw.size();
  std::vector<std::size_t> present;
  for (std::size_t i = 0; i < n; ++i) {
    if (raw.close[i]) present.push_back(i);
  }
  if (present.size() < 2) {
    throw DataError("repair_missing: need at least 2 present values, found " +
                    std::to_string(present.size()));
  }
  if (present.front() != 0) {
    throw DataError("repair_missing: first value (" + to_iso(raw.dates.front()) + ") is missing");
  }
  if (present.back() != n - 1) {
    throw DataError("repair_missing: last value (" + to_iso(raw.dates.back()) + ") is missing");
  }

  PriceSeries out;
  out.dates = raw.dates;
  out.close.resize(n);
  for (std::size_t k = 0; k + 1 < present.size(); ++k) {
    const std::size_t lo = present[k];
    const std::size_t hi = present[k + 1];
    const double a = *raw.close[lo];
    const double b = *raw.close[hi];
    out.close[lo] = a;
    for (std::size_t i = lo + 1; i < hi; ++i) {
      const double w = static_cast<double>(i - lo) / static_cast<double>(hi - lo);
      out.close[i] = a + (b - a) * w;
    }
  }
  out.close[n - 1] = *raw.close[n - 1];
  return out;
}

ScalerParams fit_scaler(std::span<const double> values) {
  if (values.empty()) throw DataError("fit_scaler: empty input");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (!(*hi > *lo)) {
    throw DataError("fit_scaler: degenerate range (min == max == " + format_double(*lo) + ")");
  }
  return {*lo, *hi};
}

double transform(const ScalerParams& s, double x) {
  return (x - s.min_x) / (s.max_x - s.min_x);
}

double inverse_transform(const ScalerParams& s, double x_norm) {
  return x_norm * (s.max_x - s.min_x) + s.min_x;
}

std::vector<double> transform(const ScalerParams& s, std::span<const double> xs) {
  std::vector<double> out(xs.size());
  std::transform(xs.begin(), xs.end(), out.begin(), [&](double x) { return transform(s, x); });
  return out;
}

std::vector<double> inverse_transform(const ScalerParams& s, std::span<const double> xs) {
  std::vector<double> out(xs.size());
  std::transform(xs.begin(), xs.end(), out.begin(),
                 [&](double x) { return inverse_transform(s, x); });
  return out;
}

WindowedDataset make_windows(std::span<const double> series, std::size_t lookback) {
  if (lookback == 0) throw DataError("make_windows: lookback must be >= 1");
  if (series.size() <= lookback) {
    throw DataError("make_windows: series of length " + std::to_string(series.size()) +
                    " is too short for lookback " + std::to_string(lookback));
  }
  WindowedDataset ds;
  ds.lookback = lookback;
  ds.samples.reserve(series.size() - lookback);
  for (std::size_t k = 0; k + lookback < series.size(); ++k) {
    Sample s;
    s.window.assign(series.begin() + static_cast<std::ptrdiff_t>(k),
                    series.begin() + static_cast<std::ptrdiff_t>(k + lookback));
    s.target = series[k + lookback];
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

SplitSpec parse_split(std::string_view text) {
  std::vector<double> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = text.find(',', start);
    const auto token = trim(text.substr(start, comma == std::string_view::npos ? comma : comma - start));
    try {
      parts.push_back(parse_double(token));
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument("split: '" + std::string(text) +
                                  "' is not three comma-separated fractions");
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (parts.size() != 3) {
    throw std::invalid_argument("split: expected 3 fractions (train,val,test), got " +
                                std::to_string(parts.size()));
  }
  SplitSpec spec{parts[0], parts[1], parts[2]};
  validate(spec);
  return spec;
}

void validate(const SplitSpec& spec) {
  if (!(spec.train > 0.0 && spec.val > 0.0 && spec.test > 0.0)) {
    throw std::invalid_argument("split: every fraction must be > 0");
  }
  if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split: fractions must sum to 1");
  }
}

SplitSizes split_sizes(std::size_t n, const SplitSpec& spec) {
  validate(spec);
  // The epsilon keeps products like 0.29 * 100 = 28.999999999999996 on the
  // intended integer.
  const auto part = [n](double frac) {
    return static_cast<std::size_t>(std::floor(frac * static_cast<double>(n) + 1e-9));
  };
  SplitSizes sizes;
  sizes.val = part(spec.val);
  sizes.test = part(spec.test);
  sizes.train = n - sizes.val - sizes.test;
  return sizes;
}

Partitions chronological_split(const PriceSeries& series, const SplitSpec& spec,
                               std::size_t min_length) {
  const SplitSizes sizes = split_sizes(series.size(), spec);
  auto take = [&](std::size_t begin, std::size_t len, const char* name) {
    if (len < min_length) {
      throw DataError(std::string("chronological_split: ") + name + " partition has " +
                      std::to_string(len) + " points, needs at least " + std::to_string(min_length));
    }
    PriceSeries part;
    const auto b = static_cast<std::ptrdiff_t>(begin);
    const auto e = static_cast<std::ptrdiff_t>(begin + len);
    part.dates.assign(series.dates.begin() + b, series.dates.begin() + e);
    part.close.assign(series.close.begin() + b, series.close.begin() + e);
    return part;
  };
  Partitions p;
  p.train = take(0, sizes.train, "train");
  p.val = take(sizes.train, sizes.val, "validation");
  p.test = take(sizes.train + sizes.val, sizes.test, "test");
  return p;
}

std::string_view to_string(ScalerMode mode) {
  return mode == ScalerMode::TrainOnly ? "train-only" : "full-series";
}

ScalerMode parse_scaler_mode(std::string_view name) {
  if (name == "train-only") return ScalerMode::TrainOnly;
  if (name == "full-series") return ScalerMode::FullSeries;
  throw std::invalid_argument("unknown scaler mode '" + std::string(name) +
                              "' (expected one of: train-only, full-series)");
}

PreparedData rebuild(Partitions partitions, const ScalerParams& scaler, std::size_t lookback,
                     ScalerMode mode) {
  PreparedData out;
  out.scaler = scaler;
  out.lookback = lookback;
  out.scaler_mode = mode;
  out.train = make_windows(transform(scaler, partitions.train.close), lookback);
  out.val = make_windows(transform(scaler, partitions.val.close), lookback);
  out.test = make_windows(transform(scaler, partitions.test.close), lookback);
  out.partitions = std::move(partitions);
  return out;
}

PreparedData prepare(const PriceSeries& series, const PrepareOptions& options) {
  Partitions parts = chronological_split(series, options.split, options.lookback + 1);
  const ScalerParams scaler = options.scaler_mode == ScalerMode::TrainOnly
                                  ? fit_scaler(parts.train.close)
                                  : fit_scaler(series.close);
  return rebuild(std::move(parts), scaler, options.lookback, options.scaler_mode);
}

PriceSeries make_sine_trend_series(std::size_t n, std::uint64_t seed) {
  using namespace std::chrono;
  Rng rng(seed);
  PriceSeries out;
  out.dates.reserve(n);
  out.close.reserve(n);
  sys_days day = sys_days{year{2000} / January / 3};
  for (std::size_t k = 0; k < n; ++k) {
    while (weekday{day} == Saturday || weekday{day} == Sunday) day += days{1};
    const double t = static_cast<double>(k);
    const double price = 100.0 + 0.1 * t + 10.0 * std::sin(2.0 * std::numbers::pi * t / 50.0) +
                         rng.uniform(-0.5, 0.5);
    out.dates.push_back(year_month_day{day});
    out.close.push_back(price);
    day += days{1};
  }
  return out;
}

std::string to_csv(const PriceSeries& series) {
  std::string out = "Date,Close\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    out += to_iso(series.dates[i]);
    out += ',';
    out += format_double(series.close[i]);
    out += '\n';
  }
  return out;
}

}  // namespace rnnopt
