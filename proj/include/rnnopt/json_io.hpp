#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace rnnopt {

/// Pretty-prints with sorted keys, two-space indent and every floating
/// point number at 17 significant digits; NaN/Inf become null.
std::string dump_stable(const nlohmann::json& value);

/// Throws std::runtime_error mentioning the path on any I/O failure.
void write_text_file(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace rnnopt
