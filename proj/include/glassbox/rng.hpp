#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace glassbox {

// Deterministic 64-bit generator with named sub-streams.
//
// Algorithm: xoshiro256** (Blackman & Vigna), state seeded by four successive
// outputs of splitmix64(seed). Sub-streams are derived by hashing a purpose
// string with FNV-1a 64 and mixing it into the parent seed through splitmix64:
//
//   child_seed = splitmix64(parent_seed ^ fnv1a64(purpose))
//
// Every distribution below consumes a documented number of raw draws, so a
// reimplementation in another language can match streams exactly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Derived generator for an independent, purpose-named stream.
  Rng fork(std::string_view purpose) const;

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();

  // Uniform on [0, 1): (next_u64() >> 11) * 2^-53.
  double uniform01();

  // Uniform on [lo, hi).
  double uniform(double lo, double hi);

  // Uniform integer in [0, n). Debiased via rejection on the top of the range.
  std::uint64_t uniform_int(std::uint64_t n);

  // Standard normal, Box-Muller cosine branch; consumes exactly two uniforms.
  double normal();

  // Gamma(shape, 1). Marsaglia-Tsang squeeze for shape >= 1, boosted by
  // U^(1/shape) for shape < 1.
  double gamma(double shape);

  // Symmetric Dirichlet(concentration * 1_n); sums to 1 exactly up to rounding.
  std::vector<double> dirichlet(double concentration, std::size_t n);

  // Poisson(mean) by Knuth's product-of-uniforms method (intended for small
  // means).
  int poisson(double mean);

  // Fisher-Yates permutation of {0, ..., n-1}.
  std::vector<std::size_t> permutation(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_int(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  static std::uint64_t splitmix64(std::uint64_t& state);
  static std::uint64_t fnv1a64(std::string_view s);

 private:
  std::uint64_t seed_;
  std::uint64_t state_[4];
};

}  // namespace glassbox
