#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rnnopt/data.hpp"
#include "rnnopt/json_io.hpp"
#include "rnnopt/linalg.hpp"

using namespace rnnopt;
using namespace std::chrono;

namespace {

RawPriceSeries raw_of(std::vector<std::optional<double>> closes) {
  RawPriceSeries r;
  sys_days day = sys_days{2020y / January / 1};
  for (std::size_t i = 0; i < closes.size(); ++i) r.dates.push_back(year_month_day{day + days(i)});
  r.close = std::move(closes);
  return r;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(ParseCsv, WellFormedRowsComeBackAscending) {
  const std::string text =
      "Date,Open,High,Low,Close,Adj Close,Volume\n"
      "2020-01-03,1,1,1,12.5,12.5,100\n"
      "2020-01-01,1,1,1,10.0,10.0,100\n"
      "2020-01-02,1,1,1,11.25,11.25,100\n";
  const RawPriceSeries r = parse_csv(text);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(to_iso(r.dates[0]), "2020-01-01");
  EXPECT_EQ(to_iso(r.dates[2]), "2020-01-03");
  EXPECT_EQ(r.close[1], 11.25);
  EXPECT_EQ(r.missing_count(), 0u);
}

TEST(ParseCsv, NullAndJunkCellsAreMissing) {
  const std::string text =
      "Date,Close\r\n2020-01-01,10\r\n2020-01-02,null\r\n2020-01-03,abc\r\n2020-01-04,-3\r\n"
      "2020-01-05,\r\n2020-01-06,20\r\n";
  const RawPriceSeries r = parse_csv(text);
  ASSERT_EQ(r.size(), 6u);
  EXPECT_EQ(r.missing_count(), 4u);
  EXPECT_FALSE(r.close[1].has_value());
  const PriceSeries s = repair_missing(r);
  EXPECT_EQ(s.close.front(), 10.0);
  EXPECT_EQ(s.close.back(), 20.0);
  EXPECT_DOUBLE_EQ(s.close[1], 12.0);
}

TEST(ParseCsv, AlternateColumnAndBom) {
  const std::string text = "\xEF\xBB\xBF" "Date,Close,Adj Close\n2020-01-01,10,9.5\n2020-01-02,11,10.5\n";
  EXPECT_EQ(parse_csv(text, "Adj Close").close[1], 10.5);
}

TEST(ParseCsv, ErrorsNameColumnAndLine) {
  EXPECT_NE(error_of([] { parse_csv("Date,Open\n2020-01-01,3\n"); }).find("Close"), std::string::npos);
  EXPECT_THROW(parse_csv("Date,Close\n"), DataError);
  EXPECT_THROW(parse_csv(""), DataError);
  const std::string dup = error_of([] { parse_csv("Date,Close\n2020-01-01,1\n2020-01-01,2\n"); });
  EXPECT_NE(dup.find("duplicate"), std::string::npos) << dup;
  EXPECT_NE(dup.find("line 3"), std::string::npos) << dup;
  const std::string bad_date = error_of([] { parse_csv("Date,Close\n2020-02-30,1\n"); });
  EXPECT_NE(bad_date.find("line 2"), std::string::npos) << bad_date;
  EXPECT_NE(error_of([] { parse_csv("Date,Close\n2020-01-01,1,2\n"); }).find("line 2"), std::string::npos);
}

TEST(ParseCsv, ReadFileErrorsCarryPath) {
  const std::string msg = error_of([] { read_csv_file("/nonexistent/prices.csv"); });
  EXPECT_NE(msg.find("/nonexistent/prices.csv"), std::string::npos) << msg;
}

TEST(Repair, Midpoint) {
  EXPECT_EQ(repair_missing(raw_of({10.0, std::nullopt, 20.0})).close, (std::vector<double>{10, 15, 20}));
}

TEST(Repair, TwoGapHandInterpolation) {
  const auto s = repair_missing(raw_of({10.0, std::nullopt, std::nullopt, 16.0}));
  ASSERT_EQ(s.size(), 4u);
  EXPECT_NEAR(s.close[1], 12.0, 1e-12);
  EXPECT_NEAR(s.close[2], 14.0, 1e-12);
}

TEST(Repair, NoGapsIsIdentityAndPresentValuesPreserved) {
  Rng rng(6);
  std::vector<std::optional<double>> vals;
  for (int i = 0; i < 201; ++i) {  // ends on a present value
    const double v = rng.uniform(1.0, 100.0);
    vals.push_back(i % 7 == 3 ? std::nullopt : std::optional<double>(v));
  }
  const auto s = repair_missing(raw_of(vals));
  for (std::size_t i = 0; i < vals.size(); ++i)
    if (vals[i]) EXPECT_EQ(s.close[i], *vals[i]);
  std::vector<std::optional<double>> full{1.0, 2.0, 3.0};
  EXPECT_EQ(repair_missing(raw_of(full)).close, (std::vector<double>{1, 2, 3}));
}

TEST(Repair, BoundaryOrAllMissingRejected) {
  EXPECT_THROW(repair_missing(raw_of({std::nullopt, 1.0, 2.0})), DataError);
  EXPECT_THROW(repair_missing(raw_of({1.0, 2.0, std::nullopt})), DataError);
  EXPECT_THROW(repair_missing(raw_of({std::nullopt, std::nullopt})), DataError);
}

TEST(Scaler, FitsExtremaAndRejectsConstant) {
  const std::vector<double> v{2, 4, 10};
  const ScalerParams s = fit_scaler(v);
  EXPECT_EQ(s.min_x, 2.0);
  EXPECT_EQ(s.max_x, 10.0);
  const std::vector<double> flat{5, 5, 5};
  EXPECT_THROW(fit_scaler(flat), DataError);
}

TEST(Scaler, TransformFixedPoints) {
  const ScalerParams s{0.0, 10.0};
  EXPECT_EQ(transform(s, 5.0), 0.5);
  const ScalerParams t{3.5, 17.25};
  EXPECT_EQ(transform(t, 3.5), 0.0);
  EXPECT_EQ(transform(t, 17.25), 1.0);
  EXPECT_GT(transform(t, 30.0), 1.0);  // held-out values are not clamped
  EXPECT_LT(transform(t, 1.0), 0.0);
}

TEST(Scaler, RoundTripWithinTolerance) {
  Rng rng(19);
  const ScalerParams s{0.3, 182.7};
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-50.0, 500.0);
    worst = std::max(worst, std::abs(inverse_transform(s, transform(s, x)) - x));
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(Windows, CountsAndContents) {
  const std::vector<double> five{1, 2, 3, 4, 5};
  const WindowedDataset w = make_windows(five, 3);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w.samples[0].window, (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(w.samples[0].target, 4.0);
  EXPECT_EQ(w.samples.back().target, 5.0);
  EXPECT_THROW(make_windows(five, 5), DataError);
  EXPECT_THROW(make_windows(five, 0), DataError);
}

TEST(Windows, CountIsLengthMinusLookback) {
  for (std::size_t n = 2; n < 40; ++n) {
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = double(i);
    for (std::size_t L = 1; L < n; ++L) {
      const auto w = make_windows(s, L);
      ASSERT_EQ(w.size(), n - L);
      for (std::size_t k = 0; k < w.size(); ++k) ASSERT_EQ(w.samples[k].target, double(k + L));
    }
  }
}

TEST(Split, ParseAndValidate) {
  const SplitSpec s = parse_split("0.8,0.1,0.1");
  EXPECT_EQ(s.train, 0.8);
  EXPECT_THROW(validate(parse_split("0.5,0.2,0.2")), std::invalid_argument);
  EXPECT_ANY_THROW(parse_split("0.7,0.3"));
  EXPECT_ANY_THROW(validate(parse_split("1.1,-0.05,-0.05")));
}

TEST(Split, FloorRuleWithRemainderToTrain) {
  const SplitSizes ten = split_sizes(10, SplitSpec{0.8, 0.1, 0.1});
  EXPECT_EQ(ten.train, 8u);
  EXPECT_EQ(ten.val, 1u);
  EXPECT_EQ(ten.test, 1u);
  // floor(0.15 * 2665) = floor(399.75) = 399 for both held-out parts.
  const SplitSizes full = split_sizes(2665, SplitSpec{});
  EXPECT_EQ(full.val, 399u);
  EXPECT_EQ(full.test, 399u);
  EXPECT_EQ(full.train, 1867u);
}

TEST(Split, ContiguousAndOrdered) {
  const PriceSeries s = make_sine_trend_series(300);
  const Partitions p = chronological_split(s, SplitSpec{}, 21);
  EXPECT_EQ(p.train.size() + p.val.size() + p.test.size(), s.size());
  EXPECT_LT(p.train.dates.back(), p.val.dates.front());
  EXPECT_LT(p.val.dates.back(), p.test.dates.front());
  EXPECT_EQ(p.train.close.front(), s.close.front());
  EXPECT_EQ(p.test.close.back(), s.close.back());
  EXPECT_THROW(chronological_split(s, SplitSpec{}, 46), DataError);  // val/test hold 45 points
}

TEST(Prepare, TrainOnlyScalerIgnoresHeldOutData) {
  // No leakage by construction: rewriting every val/test price cannot
  // change the scaler or the training windows.
  const PriceSeries base = make_sine_trend_series(400);
  PriceSeries altered = base;
  const SplitSizes sz = split_sizes(base.size(), SplitSpec{});
  for (std::size_t i = sz.train; i < altered.size(); ++i) altered.close[i] = 1e4 + double(i);
  PrepareOptions opt;
  opt.lookback = 20;
  const PreparedData a = prepare(base, opt), b = prepare(altered, opt);
  EXPECT_EQ(a.scaler.min_x, b.scaler.min_x);
  EXPECT_EQ(a.scaler.max_x, b.scaler.max_x);
  ASSERT_EQ(a.train.size(), b.train.size());
  for (std::size_t k = 0; k < a.train.size(); ++k) {
    EXPECT_EQ(a.train.samples[k].window, b.train.samples[k].window);
    EXPECT_EQ(a.train.samples[k].target, b.train.samples[k].target);
  }
  EXPECT_GT(b.test.samples[0].target, 1.0);
}

TEST(Prepare, FullSeriesModeUsesGlobalExtrema) {
  const PriceSeries s = make_sine_trend_series(400);
  PrepareOptions opt;
  opt.lookback = 20;
  opt.scaler_mode = ScalerMode::FullSeries;
  const PreparedData d = prepare(s, opt);
  EXPECT_EQ(d.scaler.min_x, *std::min_element(s.close.begin(), s.close.end()));
  EXPECT_EQ(d.scaler.max_x, *std::max_element(s.close.begin(), s.close.end()));
}

TEST(Prepare, WindowCountsMatchClosedFormPerPartition) {
  const PriceSeries s = make_sine_trend_series(500);
  for (std::size_t L : {1u, 5u, 20u, 60u}) {
    PrepareOptions opt;
    opt.lookback = L;
    const PreparedData d = prepare(s, opt);
    EXPECT_EQ(d.train.size(), d.partitions.train.size() - L);
    EXPECT_EQ(d.val.size(), d.partitions.val.size() - L);
    EXPECT_EQ(d.test.size(), d.partitions.test.size() - L);
    // the first val window starts at the first val price, so nothing straddles
    EXPECT_EQ(d.val.samples[0].window[0], transform(d.scaler, d.partitions.val.close[0]));
  }
}

TEST(Prepare, PreparedFileReloadsByteStable) {
  const auto dir = std::filesystem::temp_directory_path() / "rnnopt_test_data";
  std::filesystem::create_directories(dir);
  PrepareOptions opt;
  opt.lookback = 15;
  const PreparedData d = prepare(make_sine_trend_series(300), opt);
  save_prepared(d, dir / "a.json", "sine.csv");
  std::string source;
  const PreparedData back = load_prepared(dir / "a.json", &source);
  EXPECT_EQ(source, "sine.csv");
  save_prepared(back, dir / "b.json", source);
  EXPECT_EQ(read_file((dir / "a.json").string()), read_file((dir / "b.json").string()));
  ASSERT_EQ(back.train.size(), d.train.size());
  EXPECT_EQ(back.test.samples.back().target, d.test.samples.back().target);
  write_text_file(dir / "c.json", "{\"format\": \"something else\"}");
  EXPECT_THROW(load_prepared(dir / "c.json"), DataError);
}

TEST(Synthetic, BundledFileMatchesGenerator) {
  const std::string bundled = read_file(std::string(RNNOPT_DATA_DIR) + "/synthetic_sine_trend.csv");
  EXPECT_EQ(bundled, to_csv(make_sine_trend_series(500, 7)));
  const PriceSeries s = repair_missing(parse_csv(bundled));
  EXPECT_EQ(s.size(), 500u);
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LT(s.dates[i - 1], s.dates[i]);
}

TEST(BundledData, AllSamplesParse) {
  for (const char* name : {"aapl_monthly_1990_2022.csv", "goog_daily_2004_2008.csv"}) {
    const auto raw = read_csv_file(std::string(RNNOPT_DATA_DIR) + "/" + name);
    EXPECT_GT(raw.size(), 300u) << name;
    EXPECT_EQ(raw.missing_count(), 0u) << name;
  }
}
