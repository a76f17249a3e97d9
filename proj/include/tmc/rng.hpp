#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace tmc {

// Reproducible random stream keyed by (seed, stream id). Two streams with the
// same key produce identical draws; distinct stream ids are decorrelated by
// seeding the engine through std::seed_seq.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next() { return engine_(); }
  double uniform();  // [0, 1) with 53 random bits
  bool bernoulli(double p) { return uniform() < p; }
  std::int8_t sign() { return (engine_() >> 63) ? std::int8_t{-1} : std::int8_t{1}; }
  std::uint64_t index(std::uint64_t n);  // uniform in [0, n)
  double normal();

  // Engine state as text; restore() reproduces the exact continuation.
  std::string state() const;
  void restore(const std::string& state);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

// Deterministic stream id derived from a list of small integer keys.
std::uint64_t stream_id(std::initializer_list<std::uint64_t> keys);

}  // namespace tmc
