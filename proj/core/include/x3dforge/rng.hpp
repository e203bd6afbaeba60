#pragma once

#include <cstdint>

namespace x3df {

/// splitmix64 stream. Fully specified arithmetic, so bit streams match
/// across platforms and standard libraries.
struct Rng {
  std::uint64_t state;

  explicit Rng(std::uint64_t seed) : state(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double next_unit() {  // [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  float next_uniform(double bound) {  // [-bound, bound)
    return static_cast<float>(bound * (2.0 * next_unit() - 1.0));
  }
};

/// Order-sensitive combine of a seed with stream coordinates; used to give
/// every clip / draw site its own independent deterministic stream.
inline std::uint64_t mix_seed(std::uint64_t seed) { return seed; }

template <typename... Rest>
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t v,
                              Rest... rest) {
  Rng rng(seed ^ (v + 0x9e3779b97f4a7c15ULL));
  return mix_seed(rng.next_u64(), static_cast<std::uint64_t>(rest)...);
}

}  // namespace x3df
