#pragma once

#include <cstdint>
#include <random>

#include "subspace/matrix.hpp"

namespace subspace {

/// Seeded generator shared by task builders and tuner initializers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  std::uint64_t next() { return engine_(); }
  std::mt19937_64& engine() noexcept { return engine_; }

  Matrix gaussian(std::size_t rows, std::size_t cols, double stddev = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.values()) v = normal(0.0, stddev);
    return m;
  }
  Vector gaussian_vector(std::size_t n, double stddev = 1.0) {
    Vector v(n);
    for (double& x : v) x = normal(0.0, stddev);
    return v;
  }

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer; combines a master seed with stream indices.
constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace subspace
