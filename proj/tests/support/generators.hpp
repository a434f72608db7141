#pragma once

// Small seeded generators for property tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace evsynth::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double a = 0.0, double b = 1.0) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  std::uint64_t integer(std::uint64_t lo, std::uint64_t hi) {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng_);
  }
  /// Point on the open simplex with k components.
  std::vector<double> simplex(std::size_t k) {
    std::vector<double> v(k);
    double total = 0.0;
    for (double& x : v) total += x = -std::log(uniform(1e-12, 1.0));
    for (double& x : v) x /= total;
    return v;
  }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Every vector of k non-negative counts with total exactly `total`.
inline void for_each_composition(std::size_t k, std::uint64_t total, const auto& visit) {
  std::vector<std::uint64_t> c(k, 0);
  auto rec = [&](auto&& self, std::size_t i, std::uint64_t left) -> void {
    if (i + 1 == k) {
      c[i] = left;
      visit(c);
      return;
    }
    for (std::uint64_t v = 0; v <= left; ++v) {
      c[i] = v;
      self(self, i + 1, left - v);
    }
  };
  rec(rec, 0, total);
}

}  // namespace evsynth::testing
