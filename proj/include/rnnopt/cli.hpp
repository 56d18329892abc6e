#pragma once

// Command-line front end: prepare | train | benchmark | gradcheck | report.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace rnnopt {

/// Bad flag value or config-file entry; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CliConfig {
  std::string subcommand;
  std::string data;
  std::string out;
  std::string column = "Close";
  std::string cell;  // empty: gru for train, both for gradcheck
  std::string optimizer = "adam";
  std::size_t epochs = 10;
  std::size_t hidden = 50;
  std::size_t lookback = 60;
  double lr = 0.001;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 1;
  std::string seeds;  // comma list; empty means {seed}
  std::string split = "0.7,0.15,0.15";
  std::string scaler_mode = "train-only";
  double threshold = 1e-3;
  double tolerance = 1e-5;
  bool instrument = false;
  std::string format = "both";
  bool shuffle = false;
  double clip_norm = 0.0;
  std::size_t jobs = 1;
  bool no_timing = false;
  std::string in;
  std::size_t instances = 50;
};

/// Keys accepted in a --config file (the long flag names without dashes).
const std::vector<std::string>& config_keys();

/// Applies a flat JSON object onto `config`. Unknown keys and values of the
/// wrong JSON type throw UsageError.
void apply_config_json(const nlohmann::json& object, CliConfig& config);
void apply_config_file(const std::filesystem::path& path, CliConfig& config);

/// "1,2,3" -> {1, 2, 3}; rejects empties, duplicates and non-integers.
std::vector<std::uint64_t> parse_seed_list(std::string_view text);

/// Exit codes: 0 success, 1 failed run or check, 2 usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rnnopt
