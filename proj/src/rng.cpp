#include "bganlab/rng.hpp"

#include <cmath>
#include <limits>

#include "bganlab/error.hpp"

namespace bganlab {

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw ParamError("uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(engine_());  // full 64-bit range
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return lo + static_cast<std::int64_t>(x % span);
}

double Rng::exponential(double rate) {
  if (!(rate > 0.0)) throw ParamError("exponential: rate must be positive");
  // 1 - u is in (0, 1], so the log is finite.
  return -std::log1p(-uniform()) / rate;
}

}  // namespace bganlab
