#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace orchestra {

std::uint64_t splitmix64(std::uint64_t x);

/// 64-bit FNV-1a over the bytes of `text`.
std::uint64_t fnv1a(std::string_view text);

/// Derives a child seed as a pure function of its inputs. Used everywhere a
/// random stream must not depend on iteration order (per rollout, per site).
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                          std::uint64_t a = 0, std::uint64_t b = 0);

/// Seeded random stream. The engine is std::mt19937_64 (fully specified by
/// the standard); the distributions below are implemented here so that
/// sequences are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of precision.
  double uniform01();

  /// Uniform integer on the inclusive range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Uniform index on [0, n). Requires n > 0.
  std::size_t index(std::size_t n);

  bool bernoulli(double p) { return uniform01() < p; }

  double normal();

  /// Draws an index with probability proportional to `weights` (all >= 0,
  /// positive sum).
  std::size_t categorical(std::span<const double> weights);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace orchestra
