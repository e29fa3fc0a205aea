#pragma once

// Counter-based random streams. Every Monte Carlo consumer derives its own
// stream key from (master seed, purpose tag, index), so results never depend
// on evaluation order or thread count.

#include <cstdint>
#include <limits>

namespace quenched {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 output function.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Value of a SplitMix64 stream keyed by `key` at position `counter`.
constexpr std::uint64_t counter_hash(std::uint64_t key, std::uint64_t counter) {
  return mix64(mix64(key) + (counter + 1) * kGolden);
}

constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0) {
  return counter_hash(counter_hash(seed, tag), index);
}

// Top 53 bits as a double in [0, 1).
constexpr double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Sequential SplitMix64 engine; satisfies UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(mix64(seed)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    std::uint64_t z = (state_ += kGolden);
    return mix64(z);
  }

  // Uniform on [0, 1).
  double uniform() { return to_unit((*this)()); }
  // Uniform on (0, 1].
  double uniform_open0() { return 1.0 - uniform(); }

 private:
  std::uint64_t state_;
};

// Stream purpose tags.
namespace stream {
inline constexpr std::uint64_t tail = 0x7461696c;
inline constexpr std::uint64_t coupling = 0x636f7570;
inline constexpr std::uint64_t l0 = 0x6c30;
inline constexpr std::uint64_t birkhoff = 0x6269726b;
inline constexpr std::uint64_t doubling_bits = 0x62697473;
inline constexpr std::uint64_t distortion = 0x64697374;
inline constexpr std::uint64_t bootstrap = 0x626f6f74;
inline constexpr std::uint64_t brownian = 0x62726f77;
inline constexpr std::uint64_t synthetic = 0x73796e74;
inline constexpr std::uint64_t pointwise = 0x706f696e;
}  // namespace stream

}  // namespace quenched
