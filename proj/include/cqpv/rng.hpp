#pragma once

// Seeded random streams. Every stochastic routine in the library takes an
// explicit Rng&; nothing reads global state. Child streams are derived from a
// master seed by counter-mode splitting so trial i always sees the same
// stream no matter which worker runs it.

#include <cstdint>
#include <random>
#include <stdexcept>

namespace cqpv {

/// SplitMix64 finalizer. Used only to derive seeds, never as the main engine.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the `index`-th child stream of `master` under label `stream`.
constexpr std::uint64_t child_seed(std::uint64_t master, std::uint64_t index,
                                   std::uint64_t stream = 0) noexcept {
  return splitmix64(splitmix64(master ^ splitmix64(stream)) + index);
}

class Rng {
 public:
  using engine_type = std::mt19937_64;

  explicit Rng(std::uint64_t seed) : seed_(seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t seed() const noexcept { return seed_; }

  /// Independent stream derived from this stream's seed.
  Rng child(std::uint64_t index, std::uint64_t stream = 0) const {
    return Rng(child_seed(seed_, index, stream));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return uniform() < p;
  }

  int bit() { return static_cast<int>(engine_() >> 63); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: empty range");
    // Lemire's multiply-shift; bias is at most n / 2^64.
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  double normal() { return std::normal_distribution<double>{}(engine_); }

  engine_type& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  engine_type engine_;
};

}  // namespace cqpv
