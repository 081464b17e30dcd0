#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fastuplink {

/// Deterministic pseudo-random stream. Identical seed and call sequence give
/// an identical trajectory on every platform: the engine is std::mt19937_64
/// (fully specified by the standard) and all variates are derived here rather
/// than through the implementation-defined std distributions.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  /// Child stream keyed by name; independent of how much the parent was used.
  RngStream substream(std::string_view name) const;
  RngStream substream(std::uint64_t index) const;

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer on [0, n), unbiased. n must be positive.
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer, used to derive child seeds.
std::uint64_t mix_seed(std::uint64_t x) noexcept;

}  // namespace fastuplink
