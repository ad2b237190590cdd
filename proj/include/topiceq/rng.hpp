#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace topiceq {

/// Seeded 64-bit generator (splitmix64). The stream is a pure function of
/// the seed, so every randomized routine in the toolkit is reproducible.
///
///   state += 0x9E3779B97F4A7C15
///   z = state
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   out = z ^ (z >> 31)
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  /// Independent stream keyed by (seed, a, b); used to give every
  /// (epoch, pair) its own noise regardless of evaluation order.
  static Rng derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Unbiased integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n);
  /// Box-Muller; the second variate of each pair is cached.
  double normal();
  /// Index drawn from unnormalized non-negative weights.
  std::size_t categorical(std::span<const double> weights);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace topiceq
