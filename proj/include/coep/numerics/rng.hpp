#pragma once

#include <cstdint>
#include <random>

namespace coep {

/// Reproducible random stream.
///
/// Engine: the 64-bit Mersenne Twister (std::mt19937_64), whose output
/// sequence is fixed by the C++ standard. The standard distributions are
/// implementation-defined, so every draw below is derived from raw engine
/// words with explicit arithmetic:
///   uniform()   = (word >> 11) * 2^-53, in [0, 1)
///   below(n)    = rejection sampling on the top bits, unbiased
///   normal()    = Box-Muller on two uniforms, no cached second value
/// Sub-streams are keyed with splitmix64(seed ^ splitmix64(key)).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  /// Uniform integer in [0, n). Requires n > 0.
  std::uint64_t below(std::uint64_t n);
  double normal();

  /// Independent stream derived from this stream's seed and a key.
  Rng derive(std::uint64_t key) const { return Rng(derive_seed(seed_, key)); }

  static std::uint64_t splitmix64(std::uint64_t x);
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace coep
