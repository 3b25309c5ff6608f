#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace mbbn {

/// Counter-based SplitMix64 generator.
///
/// The i-th draw is mix64(key + i * 0x9E3779B97F4A7C15), so a stream is a pure
/// function of (key, counter) and is identical on every platform. Instances
/// are cheap to copy and must not be shared between threads; call split() to
/// derive an independent child stream before fanning out.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : key_(seed) {}

  std::uint64_t seed() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * kGamma);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes two draws per call.
  double normal();

  /// Uniform integer in [0, n). Uses rejection so the result is unbiased.
  std::size_t below(std::size_t n);

  /// Child generator whose key is derived from the next draw of this one.
  Rng split() { return Rng(mix64(next_u64() ^ 0xD1B54A32D192ED03ULL)); }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace mbbn
