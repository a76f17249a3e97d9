#include "tmc/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "tmc/error.hpp"

namespace tmc {

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  engine_.seed(seq);
}

double RngStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t RngStream::index(std::uint64_t n) {
  if (n == 0) throw Error(ErrorCode::invalid_parameter, "index range must be nonempty");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v;
  do v = engine_();
  while (v >= limit);
  return v % n;
}

double RngStream::normal() {
  // Box-Muller without caching, so the stream state is the engine state alone.
  double u1;
  do u1 = uniform();
  while (u1 <= 0.0);
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string RngStream::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void RngStream::restore(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  if (!is) throw Error(ErrorCode::checkpoint_schema, "corrupt RNG state");
}

std::uint64_t stream_id(std::initializer_list<std::uint64_t> keys) {
  // splitmix64 chaining
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (std::uint64_t k : keys) {
    std::uint64_t z = h ^ (k + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    h = z ^ (z >> 31);
  }
  return h;
}

}  // namespace tmc
