#include "slowfast/seeding.hpp"

#include <bit>

namespace slowfast {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return splitmix64(splitmix64(seed) ^ (kGolden * (stream + 1)));
}

std::uint64_t hash_combine(std::uint64_t h, std::uint64_t value) noexcept {
  return splitmix64(h ^ (value + kGolden + (h << 6) + (h >> 2)));
}

std::uint64_t hash_double(double value) noexcept {
  return std::bit_cast<std::uint64_t>(value);
}

}  // namespace slowfast
