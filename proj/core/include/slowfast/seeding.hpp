#pragma once

#include <cstdint>
#include <random>

namespace slowfast {

// Stream derivation is a counter scheme: stream `k` of master seed `s` is
// keyed by splitmix64(splitmix64(s) ^ golden * (k + 1)). Replicate r of a
// sweep therefore gets the same numbers regardless of how many threads run.
std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

std::uint64_t hash_combine(std::uint64_t h, std::uint64_t value) noexcept;
std::uint64_t hash_double(double value) noexcept;

/// Standard normal draws from one mt19937_64 stream.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

  double operator()() { return normal_(engine_); }
  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace slowfast
