#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace axcap {

// FNV-1a. Used for config hashes and for deriving per-item rng substreams.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Deterministic random source. All randomness in the project flows through
// this class so that a fixed seed reproduces runs bit-for-bit. The raw
// mt19937_64 stream is mapped to doubles/indices by hand instead of through
// std distributions, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), eng_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1), 53 bits of mantissa.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform index in [0, n). Lemire-style multiply-shift reduction.
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // Independent stream for a named sub-task (per-problem shuffles etc).
  Rng substream(std::string_view label) const {
    std::uint64_t mixed = seed_ ^ (fnv1a64(label) * 0x9e3779b97f4a7c15ull);
    return Rng(mixed);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 eng_;
};

}  // namespace axcap
