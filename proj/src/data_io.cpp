#include <nlohmann/json.hpp>

#include "rnnopt/data.hpp"
#include "rnnopt/json_io.hpp"

namespace rnnopt {

namespace {

constexpr std::string_view kPreparedFormat = "rnnopt-prepared 1";

nlohmann::json series_json(const PriceSeries& s) {
  std::vector<std::string> dates;
  dates.reserve(s.size());
  for (const auto& d : s.dates) dates.push_back(to_iso(d));
  return {{"dates", dates}, {"close", s.close}};
}

PriceSeries series_from_json(const nlohmann::json& j, const char* name) {
  PriceSeries s;
  for (const auto& d : j.at("dates")) {
    const auto date = parse_iso_date(d.get<std::string>());
    if (!date) throw DataError(std::string("prepared dataset: bad date in ") + name);
    s.dates.push_back(*date);
  }
  s.close = j.at("close").get<std::vector<double>>();
  if (s.close.size() != s.dates.size()) {
    throw DataError(std::string("prepared dataset: ") + name + " dates and closes differ in length");
  }
  return s;
}

}  // namespace

void save_prepared(const PreparedData& data, const std::filesystem::path& path,
                   std::string_view source) {
  const nlohmann::json j = {
      {"format", kPreparedFormat},
      {"source", source},
      {"lookback", data.lookback},
      {"scaler_mode", to_string(data.scaler_mode)},
      {"scaler", {{"min", data.scaler.min_x}, {"max", data.scaler.max_x}}},
      {"partitions",
       {{"train", series_json(data.partitions.train)},
        {"val", series_json(data.partitions.val)},
        {"test", series_json(data.partitions.test)}}},
  };
  write_text_file(path, dump_stable(j));
}

PreparedData load_prepared(const std::filesystem::path& path, std::string* source) {
  try {
    const auto j = nlohmann::json::parse(read_text_file(path));
    if (j.at("format").get<std::string>() != kPreparedFormat) {
      throw DataError("unsupported format tag");
    }
    if (source) *source = j.at("source").get<std::string>();
    Partitions parts;
    const auto& p = j.at("partitions");
    parts.train = series_from_json(p.at("train"), "train");
    parts.val = series_from_json(p.at("val"), "val");
    parts.test = series_from_json(p.at("test"), "test");
    const ScalerParams scaler{j.at("scaler").at("min").get<double>(),
                              j.at("scaler").at("max").get<double>()};
    if (!(scaler.max_x > scaler.min_x)) throw DataError("degenerate scaler range");
    return rebuild(std::move(parts), scaler, j.at("lookback").get<std::size_t>(),
                   parse_scaler_mode(j.at("scaler_mode").get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed prepared dataset: " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace rnnopt
