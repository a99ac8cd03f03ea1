#ifndef FEWATOM_RNG_HPP
#define FEWATOM_RNG_HPP

#include <cstdint>
#include <random>

namespace fewatom {

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based substream seed: a pure function of (master, index), so a
/// run's stream does not depend on how many runs were drawn before it or on
/// which worker executes it.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Seeded random stream.  Each simulation call takes one of these by
/// reference; nothing in the library touches global random state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  static Rng substream(std::uint64_t master, std::uint64_t index) {
    return Rng(derive_seed(master, index));
  }

  std::uint64_t seed() const { return seed_; }
  std::mt19937_64& engine() { return engine_; }

  /// Uniform on [0, 1).
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  double exponential(double rate) {
    return std::exponential_distribution<double>(rate)(engine_);
  }

  std::int64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    return std::poisson_distribution<std::int64_t>(mean)(engine_);
  }

  std::int64_t binomial(std::int64_t n, double p) {
    if (n <= 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    return std::binomial_distribution<std::int64_t>(n, p)(engine_);
  }

  bool bernoulli(double p) { return uniform() < p; }

  double normal(double mean, double sigma) {
    return std::normal_distribution<double>(mean, sigma)(engine_);
  }

  std::uint64_t uniform_index(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

} // namespace fewatom

#endif // FEWATOM_RNG_HPP
