#pragma once

#include <cstdint>

#include "scale/matrix.hpp"

namespace scale {

// Counter-based generator: draw k is splitmix64(seed + (k + 1) * golden),
// with golden = 0x9E3779B97F4A7C15 and the standard splitmix64 finalizer
// (shifts 30/27/31, multipliers 0xBF58476D1CE4E5B9 / 0x94D049BB133111EB).
// Normals use the Box-Muller transform; both outputs of a pair are used.
// The stream depends only on (seed, counter), so it is reproducible on any
// platform with IEEE doubles.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;
  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;
  double normal() noexcept;

  // Independent generator derived from this seed and a stream id; does not
  // advance this generator.
  Rng split(std::uint64_t stream) const noexcept;

  Matrix normal_matrix(std::size_t rows, std::size_t cols, double stddev = 1.0);
  Matrix uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi);

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace scale
