#pragma once

#include <string>
#include <string_view>

namespace rnnopt {

/// 17-significant-digit rendering ("%.17g" semantics),
/// used for every number written to an artifact so output is byte-stable.
std::string format_double(double x);

/// Parses a complete token as a double; throws std::invalid_argument otherwise.
double parse_double(std::string_view token);

}  // namespace rnnopt
