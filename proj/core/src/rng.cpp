#include "evsynth/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace evsynth {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

namespace draw {

double uniform(Rng& rng, double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

double normal(Rng& rng, double mean, double sd) { return std::normal_distribution<double>(mean, sd)(rng); }

double half_normal(Rng& rng, double sd) { return std::abs(normal(rng, 0.0, sd)); }

double gamma(Rng& rng, double shape) { return std::gamma_distribution<double>(shape, 1.0)(rng); }

double beta(Rng& rng, double a, double b) {
  const double x = gamma(rng, a);
  const double y = gamma(rng, b);
  return x / (x + y);
}

std::vector<double> dirichlet(Rng& rng, std::span<const double> alpha) {
  std::vector<double> out(alpha.size());
  double total = 0.0;
  // Resample in the (vanishingly rare) event every gamma draw underflows.
  do {
    total = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      out[i] = gamma(rng, alpha[i]);
      total += out[i];
    }
  } while (!(total > 0.0));
  for (double& v : out) v /= total;
  // Put the rounding residue on the largest component so the sum is 1.
  const auto big = std::max_element(out.begin(), out.end());
  *big += 1.0 - std::accumulate(out.begin(), out.end(), 0.0);
  return out;
}

std::uint64_t binomial(Rng& rng, std::uint64_t n, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("binomial probability outside [0, 1]");
  if (n == 0 || p == 0.0) return 0;
  if (p == 1.0) return n;
  if (n > 50) return std::binomial_distribution<std::uint64_t>(n, p)(rng);
  // Walk the cdf from x = 0 using the pmf recurrence.
  const double u = uniform(rng);
  const double q = 1.0 - p;
  double pmf = std::pow(q, static_cast<double>(n));
  double cdf = pmf;
  std::uint64_t x = 0;
  while (u > cdf && x < n) {
    pmf *= (static_cast<double>(n - x) / static_cast<double>(x + 1)) * (p / q);
    ++x;
    cdf += pmf;
  }
  return x;
}

std::uint64_t poisson(Rng& rng, double mu) {
  if (!(mu >= 0.0)) throw std::invalid_argument("poisson mean must be non-negative");
  if (mu == 0.0) return 0;
  return std::poisson_distribution<std::uint64_t>(mu)(rng);
}

std::vector<std::uint64_t> multinomial(Rng& rng, std::uint64_t n, std::span<const double> probs) {
  std::vector<std::uint64_t> out(probs.size(), 0);
  double remaining_p = 1.0;
  std::uint64_t remaining_n = n;
  for (std::size_t i = 0; i + 1 < probs.size() && remaining_n > 0; ++i) {
    const double p = remaining_p > 0.0 ? std::clamp(probs[i] / remaining_p, 0.0, 1.0) : 0.0;
    out[i] = binomial(rng, remaining_n, p);
    remaining_n -= out[i];
    remaining_p -= probs[i];
  }
  if (!probs.empty()) out.back() += remaining_n;
  return out;
}

}  // namespace draw
}  // namespace evsynth
