#pragma once

// Log-density kernels and link functions shared by every likelihood and
// prior in the model. All functions are pure. Boundary cases (a probability
// or rate of exactly zero) return 0 or -infinity instead of throwing so that
// Metropolis proposals landing on an impossible configuration are rejected.

#include <cstdint>
#include <limits>
#include <span>

namespace evsynth::dist {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// ln(n!). Exact summation of ln k for n <= 20, std::lgamma(n + 1) beyond.
double log_factorial(std::uint64_t n);

/// ln C(n, k).
double log_choose(std::uint64_t n, std::uint64_t k);

/// Binomial(n, p) log pmf at x. Throws std::invalid_argument if x > n or p
/// is outside [0, 1].
double binomial_log_pmf(std::uint64_t x, std::uint64_t n, double p);

/// Poisson(mu) log pmf at x. mu = 0 gives 0 at x = 0 and -inf otherwise.
double poisson_log_pmf(std::uint64_t x, double mu);

/// Multinomial log pmf of `counts` under `probs`; the total is sum(counts).
/// Requires equal lengths, probs >= 0 and sum(probs) == 1 within 1e-12.
double multinomial_log_pmf(std::span<const std::uint64_t> counts, std::span<const double> probs);

/// Dirichlet(alpha) log density at p. p must lie on the simplex (sum 1
/// within 1e-9, components >= 0) and every alpha must be positive.
double dirichlet_log_pdf(std::span<const double> p, std::span<const double> alpha);

double normal_log_pdf(double x, double mean, double sd);

/// Half-normal with scale sd on [0, inf); -inf for x < 0.
double half_normal_log_pdf(double x, double sd);

/// Uniform(a, b) log density; -inf outside the closed interval.
double uniform_log_pdf(double x, double a, double b);

/// log(p / (1 - p)); returns -inf at 0 and +inf at 1.
double logit(double p);

/// Numerically stable inverse logit.
double expit(double x);

}  // namespace evsynth::dist
