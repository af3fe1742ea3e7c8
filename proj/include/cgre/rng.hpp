#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cgre/error.hpp"

namespace cgre {

// Deterministic random stream. std::mt19937_64 is fully specified by the
// standard; the real-valued mapping below is hand-rolled because the
// std::uniform_* distributions are implementation-defined and would break
// bit-for-bit reproducibility across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    if (!(lo <= hi)) throw DomainError("Rng::uniform: empty interval");
    return lo + (hi - lo) * uniform();
  }

  // Uniform integer in [0, n).
  std::size_t below(std::size_t n) {
    if (n == 0) throw DomainError("Rng::below: n must be positive");
    return static_cast<std::size_t>(engine_() % n);
  }

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cgre
