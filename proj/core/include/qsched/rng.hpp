#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qsched {

// splitmix64 step; also used to derive independent seed streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Named seed streams so that independent parts of a run never share a
// generator by accident.
enum class SeedStream : std::uint64_t {
  Workload = 1,
  EpisodeWorkload = 2,
  AgentNoise = 3,
  ReplaySampling = 4,
  BaselinePolicy = 5,
  NetInit = 6,
};

inline std::uint64_t derive_seed(std::uint64_t base, SeedStream stream,
                                 std::uint64_t index = 0) {
  std::uint64_t x = base ^ (static_cast<std::uint64_t>(stream) * 0x9e3779b97f4a7c15ULL);
  splitmix64(x);
  x ^= (index + 1) * 0xbf58476d1ce4e5b9ULL;
  splitmix64(x);
  return splitmix64(x);
}

// Deterministic RNG wrapper. All randomness in the project flows through
// this class; the uniform/normal transforms are written out explicitly so
// that streams are reproducible independent of the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  int uniform_int(int n) {
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
  }

  // Standard normal via Box-Muller (cosine branch only).
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace qsched
