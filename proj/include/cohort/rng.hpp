#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace cohort {

/// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept;
std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt) noexcept;

/// mt19937_64 with distribution code written out here, so sampled values do
/// not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform integer in [0, n). n must be > 0.
  std::size_t below(std::size_t n);
  /// Standard normal (Box-Muller, no caching).
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cohort
