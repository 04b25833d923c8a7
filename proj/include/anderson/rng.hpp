#pragma once

#include <cstdint>

namespace anderson {

// Counter-based generator: every draw is a pure function of its key, so
// workers never share a stream and results do not depend on scheduling.

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Hash of a (seed, stream, counter) triple into 64 uniform bits.
constexpr std::uint64_t counter_bits(std::uint64_t seed, std::uint64_t stream,
                                     std::uint64_t counter) noexcept {
  std::uint64_t h = splitmix64(seed ^ 0x6a09e667f3bcc909ULL);
  h = splitmix64(h ^ stream);
  h = splitmix64(h ^ (counter * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
  return h;
}

/// Uniform double in the open interval (0, 1), 52 bits of resolution.
constexpr double to_unit_open(std::uint64_t bits) noexcept {
  // 52 bits keep k + 0.5 exact, so the result never rounds to 0 or 1.
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Sequential view over a counter-keyed substream (bootstrap, placements).
class CounterStream {
 public:
  constexpr CounterStream(std::uint64_t seed, std::uint64_t stream) noexcept
      : seed_(seed), stream_(stream) {}

  constexpr std::uint64_t next_bits() noexcept { return counter_bits(seed_, stream_, counter_++); }
  constexpr double uniform() noexcept { return to_unit_open(next_bits()); }
  /// Uniform integer in [0, n).
  constexpr std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

// Stream tags so that unrelated consumers of the same seed never collide.
namespace streams {
inline constexpr std::uint64_t kPotential = 0x0;
inline constexpr std::uint64_t kBootstrap = 0xb0075ULL << 40;
inline constexpr std::uint64_t kPlacement = 0x91ace5ULL << 40;
inline constexpr std::uint64_t kTest = 0x7e57ULL << 40;
}  // namespace streams

}  // namespace anderson
