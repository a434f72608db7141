#include "evsynth/distributions.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace evsynth::dist {

namespace {

constexpr std::uint64_t kExactFactorialLimit = 20;

const std::array<double, kExactFactorialLimit + 1>& exact_log_factorials() {
  static const auto table = [] {
    std::array<double, kExactFactorialLimit + 1> t{};
    t[0] = 0.0;
    for (std::uint64_t k = 1; k <= kExactFactorialLimit; ++k) {
      t[k] = t[k - 1] + std::log(static_cast<double>(k));
    }
    return t;
  }();
  return table;
}

// x * log(p) with the 0 * log(0) = 0 convention.
double xlogy(double x, double p) {
  if (x == 0.0) return 0.0;
  if (p == 0.0) return kNegInf;
  return x * std::log(p);
}

// x * log1p(-p) with the same convention.
double xlog1my(double x, double p) {
  if (x == 0.0) return 0.0;
  if (p == 1.0) return kNegInf;
  return x * std::log1p(-p);
}

}  // namespace

double log_factorial(std::uint64_t n) {
  if (n <= kExactFactorialLimit) return exact_log_factorials()[n];
  return std::lgamma(static_cast<double>(n) + 1.0);
}

double log_choose(std::uint64_t n, std::uint64_t k) {
  if (k > n) throw std::invalid_argument("log_choose: k > n");
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

double binomial_log_pmf(std::uint64_t x, std::uint64_t n, double p) {
  if (x > n) {
    throw std::invalid_argument("binomial_log_pmf: x = " + std::to_string(x) +
                                " exceeds n = " + std::to_string(n));
  }
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("binomial_log_pmf: p outside [0, 1]");
  const double xs = static_cast<double>(x);
  const double fails = static_cast<double>(n - x);
  const double a = xlogy(xs, p);
  const double b = xlog1my(fails, p);
  if (a == kNegInf || b == kNegInf) return kNegInf;
  return log_choose(n, x) + a + b;
}

double poisson_log_pmf(std::uint64_t x, double mu) {
  if (!(mu >= 0.0)) throw std::invalid_argument("poisson_log_pmf: negative mean");
  if (mu == 0.0) return x == 0 ? 0.0 : kNegInf;
  if (std::isinf(mu)) return kNegInf;
  return static_cast<double>(x) * std::log(mu) - mu - log_factorial(x);
}

double multinomial_log_pmf(std::span<const std::uint64_t> counts, std::span<const double> probs) {
  if (counts.size() != probs.size()) {
    throw std::invalid_argument("multinomial_log_pmf: length mismatch");
  }
  double sum_p = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw std::invalid_argument("multinomial_log_pmf: negative probability");
    sum_p += p;
  }
  if (std::abs(sum_p - 1.0) > 1e-12) {
    throw std::invalid_argument("multinomial_log_pmf: probabilities do not sum to 1");
  }
  std::uint64_t total = 0;
  double log_p = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    total += counts[i];
    const double term = xlogy(static_cast<double>(counts[i]), probs[i]);
    if (term == kNegInf) return kNegInf;
    log_p += term - log_factorial(counts[i]);
  }
  return log_factorial(total) + log_p;
}

double dirichlet_log_pdf(std::span<const double> p, std::span<const double> alpha) {
  if (p.size() != alpha.size() || p.size() < 2) {
    throw std::invalid_argument("dirichlet_log_pdf: dimension mismatch");
  }
  double sum_p = 0.0;
  double sum_alpha = 0.0;
  double log_norm = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(alpha[i] > 0.0)) throw std::invalid_argument("dirichlet_log_pdf: non-positive concentration");
    if (!(p[i] >= 0.0)) throw std::invalid_argument("dirichlet_log_pdf: off-simplex input");
    sum_p += p[i];
    sum_alpha += alpha[i];
    log_norm -= std::lgamma(alpha[i]);
  }
  if (std::abs(sum_p - 1.0) > 1e-9) throw std::invalid_argument("dirichlet_log_pdf: off-simplex input");
  log_norm += std::lgamma(sum_alpha);
  double kernel = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (alpha[i] == 1.0) continue;
    if (p[i] == 0.0) return alpha[i] > 1.0 ? kNegInf : std::numeric_limits<double>::infinity();
    kernel += (alpha[i] - 1.0) * std::log(p[i]);
  }
  return log_norm + kernel;
}

double normal_log_pdf(double x, double mean, double sd) {
  if (!(sd > 0.0)) throw std::invalid_argument("normal_log_pdf: sd must be positive");
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double half_normal_log_pdf(double x, double sd) {
  if (!(sd > 0.0)) throw std::invalid_argument("half_normal_log_pdf: sd must be positive");
  if (x < 0.0) return kNegInf;
  const double z = x / sd;
  return std::numbers::ln2 - 0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double uniform_log_pdf(double x, double a, double b) {
  if (!(a < b)) throw std::invalid_argument("uniform_log_pdf: requires a < b");
  if (x < a || x > b) return kNegInf;
  return -std::log(b - a);
}

double logit(double p) {
  if (p <= 0.0) return kNegInf;
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return std::log(p) - std::log1p(-p);
}

double expit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double ex = std::exp(x);
  return ex / (1.0 + ex);
}

}  // namespace evsynth::dist
