#pragma once

#include <cstdint>

#include "calibdr/stats.hpp"

namespace calibdr {

inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

// Counter-based stream: variate i of a stream is mix64(key + i*golden).
// Child streams derive fresh keys from the parent key and a path index, so
// any (seed, path, counter) triple addresses the same variate no matter how
// work is scheduled across threads.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key) {}

  static Rng seeded(std::uint64_t seed) {
    return Rng(mix64(seed ^ 0x5851F42D4C957F2DULL));
  }

  Rng child(std::uint64_t path) const {
    return Rng(mix64(key_ ^ (0x9E3779B97F4A7C15ULL * (path + 1))));
  }

  std::uint64_t next_u64() {
    count_ += 1;
    return mix64(key_ + 0x9E3779B97F4A7C15ULL * count_);
  }

  // Uniform on the open interval (0,1); never returns an endpoint.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() { return norm_quantile(uniform()); }

 private:
  std::uint64_t key_;
  std::uint64_t count_ = 0;
};

}  // namespace calibdr
