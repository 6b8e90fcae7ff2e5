#ifndef COARSEN_RNG_HPP
#define COARSEN_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace coarsen {

// The standard distributions have no fully specified output, so the few
// draws we need are written out here to keep records identical across
// standard libraries.

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) { return mix64(x + kGolden); }

/// SplitMix64 generator: a Weyl sequence through the finalizer.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit constexpr SplitMix64(std::uint64_t seed = 0) : state_(seed) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  constexpr result_type operator()() { return mix64(state_ += kGolden); }

 private:
  std::uint64_t state_;
};

using Rng = SplitMix64;

/// Seed of trial `index` under base seed `base`:
///   splitmix64(base ^ splitmix64(index)).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(base ^ splitmix64(index));
}

/// Independent sub-streams of one record seed.
enum class Stream : std::uint64_t { Initial = 1, Rings = 2 };
constexpr std::uint64_t stream_seed(std::uint64_t seed, Stream s) {
  return derive_seed(seed, 0xC0A45E00ULL + static_cast<std::uint64_t>(s));
}

/// Uniform in the open interval (0, 1) from the top 53 bits of a word.
inline double open_unit(std::uint64_t word) {
  return (static_cast<double>(word >> 11) + 0.5) * 0x1.0p-53;
}

inline double uniform01(Rng& rng) { return open_unit(rng()); }

/// Unbiased integer in [0, n) (Lemire's multiply-and-reject), starting from
/// an already drawn word; further words are drawn only on rejection.
inline std::uint64_t bounded_from(std::uint64_t word, Rng& rng, std::uint64_t n) {
  unsigned __int128 m = static_cast<unsigned __int128>(word) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(rng()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

inline std::uint64_t bounded(Rng& rng, std::uint64_t n) { return bounded_from(rng(), rng, n); }

}  // namespace coarsen

#endif  // COARSEN_RNG_HPP
