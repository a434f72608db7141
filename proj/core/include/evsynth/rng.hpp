#pragma once

// Random streams and variate generation shared by the sampler and the
// synthetic-data generator. Every stream is a std::mt19937_64 seeded from
// (seed, index) through a splitmix64 mix, so chains and replications get
// reproducible, decorrelated streams from one user-facing seed.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace evsynth {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// Seed of stream `index` derived from a master seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

inline Rng make_stream(std::uint64_t seed, std::uint64_t index) { return Rng(derive_seed(seed, index)); }

namespace draw {

double uniform(Rng& rng, double a = 0.0, double b = 1.0);
double normal(Rng& rng, double mean = 0.0, double sd = 1.0);
double half_normal(Rng& rng, double sd);
double gamma(Rng& rng, double shape);
double beta(Rng& rng, double a, double b);
std::vector<double> dirichlet(Rng& rng, std::span<const double> alpha);

/// Inversion for n <= 50; std::binomial_distribution beyond.
std::uint64_t binomial(Rng& rng, std::uint64_t n, double p);
std::uint64_t poisson(Rng& rng, double mu);
/// Sequential conditional binomials; components sum to n.
std::vector<std::uint64_t> multinomial(Rng& rng, std::uint64_t n, std::span<const double> probs);

}  // namespace draw
}  // namespace evsynth
