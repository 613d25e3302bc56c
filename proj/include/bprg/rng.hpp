#pragma once

#include <cstddef>
#include <cstdint>

namespace bprg {

// splitmix64. The only random source in the project, so every experiment is
// reproducible from its seed on any platform.
class RngState {
 public:
  explicit RngState(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  // (z >> 11) * 2^-53, in [0, 1)
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }

  // floor(uniform() * n), in [0, n). n must be positive.
  std::size_t below(std::size_t n);

  // Independent child stream seeded from this stream's next output.
  RngState split() { return RngState(next()); }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace bprg
