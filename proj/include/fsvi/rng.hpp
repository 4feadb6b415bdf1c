#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace fsvi {

// Key-based deterministic randomness. Every stochastic operation takes an
// explicit RngKey and derives sub-keys for its internal draws, so a value
// and its gradient (or a recomputation in a test) can replay the exact same
// noise. Draws are generated by a hand-rolled splitmix64/Box-Muller pipeline
// rather than <random> distributions, which keeps streams identical across
// standard-library implementations.
struct RngKey {
  std::uint64_t state = 0;
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& s) {
  s += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}
}  // namespace detail

// Child key for a tagged substream. Deriving with distinct tags yields
// statistically independent streams.
inline RngKey derive(RngKey key, std::uint64_t tag) {
  std::uint64_t s = key.state ^ (0x9E6C63D0876A9A35ull * (tag + 1));
  std::uint64_t a = detail::splitmix64(s);
  std::uint64_t b = detail::splitmix64(s);
  return RngKey{a ^ (b << 1)};
}

class Rng {
 public:
  explicit Rng(RngKey key) : state_(key.state) {}

  std::uint64_t next_u64() { return detail::splitmix64(state_); }

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; safe as a log argument.
  double uniform_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller. Both values of the pair are computed and
  // the sine branch discarded, so the stream position never depends on call
  // history.
  double normal() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Uniform integer in [0, n). Lemire's multiply-shift; bias is < 2^-64.
  std::uint64_t uniform_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

 private:
  std::uint64_t state_;
};

inline std::vector<double> standard_normals(RngKey key, std::size_t count) {
  Rng rng(key);
  std::vector<double> out(count);
  for (auto& x : out) x = rng.normal();
  return out;
}

}  // namespace fsvi
