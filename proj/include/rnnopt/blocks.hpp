#pragma once

#include <span>
#include <string_view>

namespace rnnopt {

/// A named, contiguous run of parameters (one weight matrix or bias vector).
/// Optimizers keep one slot of state per block and walk blocks in order.
struct BlockView {
  std::string_view name;
  std::span<double> values;
};

struct ConstBlockView {
  std::string_view name;
  std::span<const double> values;
};

}  // namespace rnnopt
