#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace tagrec {

std::uint64_t splitmix64(std::uint64_t& state);

// Order-dependent combination of two seeds into a well-mixed 64-bit value.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

std::uint64_t fnv1a64(std::string_view bytes);

/// Portable seeded generator.
///
/// std::mt19937_64 is fully specified by the standard, but the standard
/// distributions are not, so bounded draws and shuffles are implemented here
/// to keep partitions and traces identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);

  // Uniform real in [0, 1) with 53 bits of precision.
  double unit();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = below(i);
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tagrec
