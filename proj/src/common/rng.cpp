#include "common/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "common/error.hpp"

namespace prectr {

std::uint64_t Rng::below(std::uint64_t n) {
  require(n > 0, ErrorKind::Precondition, "Rng::below: n must be positive");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

double Rng::normal() {
  // Box-Muller; one of the pair is discarded so the stream stays simple.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::beta_int(int a, int b) {
  require(a >= 1 && b >= 1, ErrorKind::Precondition, "beta shapes must be >= 1");
  std::vector<double> draws(static_cast<std::size_t>(a + b - 1));
  for (auto& d : draws) d = uniform();
  std::nth_element(draws.begin(), draws.begin() + (a - 1), draws.end());
  return draws[static_cast<std::size_t>(a - 1)];
}

}  // namespace prectr
