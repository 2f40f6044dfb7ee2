#pragma once

// Portable random streams. Golden files depend on the exact sequence, so the
// transforms from raw 64-bit words to doubles are spelled out here instead
// of going through <random> distributions (whose algorithms are
// implementation-defined).
//
//   stream seed = splitmix64(seed ^ (stream_id * 0x9E3779B97F4A7C15))
//   engine      = std::mt19937_64(stream seed)
//   uniform     = (word >> 11) * 2^-53                       in [0, 1)
//   normal      = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)         one per two words

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace lureid {

inline constexpr std::string_view kRngAlgorithm = "mt19937_64+splitmix64-streams+box-muller";

enum class Stream : std::uint64_t {
  initial_state = 1,
  input_noise = 2,
  measurement_noise = 3,
  process_noise = 4,
  sampling = 5,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  Rng(std::uint64_t seed, Stream stream)
      : engine_(splitmix64(seed ^ (static_cast<std::uint64_t>(stream) * 0x9E3779B97F4A7C15ULL))) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace lureid
