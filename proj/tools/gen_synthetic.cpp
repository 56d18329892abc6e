// Writes the bundled sine-plus-trend CSV: gen_synthetic [points] [seed] > file
#include <cstdlib>
#include <iostream>

#include "rnnopt/data.hpp"

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 500;
  const std::uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 7;
  std::cout << rnnopt::to_csv(rnnopt::make_sine_trend_series(n, seed));
  return 0;
}
