#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "evsynth/distributions.hpp"
#include "support/generators.hpp"

using namespace evsynth;
using evsynth::testing::for_each_composition;

namespace {

// ln of a product of small integers, summed directly.
double ln_fact(std::uint64_t n) {
  double s = 0.0;
  for (std::uint64_t k = 2; k <= n; ++k) s += std::log(static_cast<double>(k));
  return s;
}

}  // namespace

TEST(Binomial, Examples) {
  EXPECT_NEAR(dist::binomial_log_pmf(0, 1, 0.5), std::log(0.5), 1e-12);
  EXPECT_NEAR(dist::binomial_log_pmf(5, 10, 0.5), std::log(252.0 / 1024.0), 1e-12);
  // ln(252/1024) = -1.402043; the commonly quoted -1.40194 is a rounding slip.
  EXPECT_NEAR(dist::binomial_log_pmf(5, 10, 0.5), -1.402043, 1e-6);
  EXPECT_EQ(dist::binomial_log_pmf(0, 7, 0.0), 0.0);
  EXPECT_EQ(dist::binomial_log_pmf(3, 7, 0.0), dist::kNegInf);
  EXPECT_EQ(dist::binomial_log_pmf(7, 7, 1.0), 0.0);
  EXPECT_EQ(dist::binomial_log_pmf(6, 7, 1.0), dist::kNegInf);
  EXPECT_THROW(dist::binomial_log_pmf(8, 7, 0.5), std::invalid_argument);
}

TEST(Binomial, NormalizesOverSupport) {
  for (std::uint64_t n = 0; n <= 12; ++n) {
    for (int i = 1; i <= 9; ++i) {
      const double p = i / 10.0;
      double total = 0.0;
      for (std::uint64_t x = 0; x <= n; ++x) total += std::exp(dist::binomial_log_pmf(x, n, p));
      EXPECT_NEAR(total, 1.0, 1e-12) << "n=" << n << " p=" << p;
    }
  }
}

TEST(Poisson, Examples) {
  EXPECT_NEAR(dist::poisson_log_pmf(0, 1.0), -1.0, 1e-15);
  EXPECT_EQ(dist::poisson_log_pmf(0, 0.0), 0.0);
  EXPECT_EQ(dist::poisson_log_pmf(2, 0.0), dist::kNegInf);
  const double oracle = -ln_fact(50) + 50.0 * std::log(50.0) - 50.0;
  EXPECT_NEAR(dist::poisson_log_pmf(50, 50.0), oracle, 1e-10);
  EXPECT_NEAR(dist::poisson_log_pmf(50, 50.0), -2.876617, 1e-6);
}

TEST(LogFactorial, CrossoverMatchesExactSum) {
  for (std::uint64_t n = 0; n <= 40; ++n) EXPECT_NEAR(dist::log_factorial(n), ln_fact(n), 1e-12 * std::max(1.0, ln_fact(n))) << n;
  EXPECT_NEAR(std::lgamma(21.0), ln_fact(20), 1e-12 * ln_fact(20));
}

TEST(Multinomial, Examples) {
  const std::vector<std::uint64_t> a{1, 0}, b{1, 1}, c{2, 0, 0};
  EXPECT_EQ(dist::multinomial_log_pmf(a, std::vector<double>{1.0, 0.0}), 0.0);
  EXPECT_NEAR(dist::multinomial_log_pmf(b, std::vector<double>{0.5, 0.5}), std::log(0.5), 1e-12);
  EXPECT_NEAR(dist::multinomial_log_pmf(c, std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}), std::log(1.0 / 9.0), 1e-12);
}

TEST(Multinomial, ContractViolations) {
  const std::vector<std::uint64_t> counts{1, 2};
  EXPECT_THROW(dist::multinomial_log_pmf(counts, std::vector<double>{1.0}), std::invalid_argument);
  EXPECT_THROW(dist::multinomial_log_pmf(counts, std::vector<double>{1.5, -0.5}), std::invalid_argument);
}

TEST(Multinomial, NormalizesOverCompositions) {
  evsynth::testing::Gen gen(11);
  for (std::size_t k = 2; k <= 3; ++k) {
    for (std::uint64_t total = 0; total <= 6; ++total) {
      auto p = gen.simplex(k);
      double s = 0.0;
      for (double v : p) s += v;
      p.back() += 1.0 - s;
      double mass = 0.0;
      for_each_composition(k, total, [&](const std::vector<std::uint64_t>& c) {
        mass += std::exp(dist::multinomial_log_pmf(c, p));
      });
      EXPECT_NEAR(mass, 1.0, 1e-10) << "k=" << k << " total=" << total;
    }
  }
}

TEST(Multinomial, PoissonFactorization) {
  evsynth::testing::Gen gen(5);
  for (std::size_t k = 2; k <= 3; ++k) {
    std::vector<double> mu(k);
    for (double& m : mu) m = gen.uniform(0.2, 4.0);
    double m_total = 0.0;
    for (double m : mu) m_total += m;
    std::vector<double> xi(k);
    for (std::size_t j = 0; j < k; ++j) xi[j] = mu[j] / m_total;
    for (std::uint64_t total = 0; total <= 8; ++total) {
      for_each_composition(k, total, [&](const std::vector<std::uint64_t>& c) {
        double independent = 0.0;
        for (std::size_t j = 0; j < k; ++j) independent += dist::poisson_log_pmf(c[j], mu[j]);
        const double joint = dist::poisson_log_pmf(total, m_total) + dist::multinomial_log_pmf(c, xi);
        EXPECT_NEAR(joint, independent, 1e-10);
      });
    }
  }
}

TEST(Dirichlet, Examples) {
  const std::vector<double> ones{1, 1, 1, 1};
  EXPECT_NEAR(dist::dirichlet_log_pdf(std::vector<double>{0.25, 0.25, 0.25, 0.25}, ones), std::log(6.0), 1e-12);
  EXPECT_NEAR(dist::dirichlet_log_pdf(std::vector<double>{0.5, 0.5}, std::vector<double>{2, 2}), std::log(1.5), 1e-12);
  EXPECT_THROW(dist::dirichlet_log_pdf(std::vector<double>{0.5, 0.6}, std::vector<double>{1, 1}), std::invalid_argument);
}

TEST(Dirichlet, UnitConcentrationIsFlat) {
  evsynth::testing::Gen gen(3);
  const std::vector<double> ones{1, 1, 1, 1};
  for (int i = 0; i < 200; ++i) {
    EXPECT_NEAR(dist::dirichlet_log_pdf(gen.simplex(4), ones), std::log(6.0), 1e-12);
  }
}

TEST(Normal, Examples) {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  EXPECT_NEAR(dist::normal_log_pdf(0.0, 0.0, 1.0), -half_log_2pi, 1e-15);
  EXPECT_NEAR(dist::normal_log_pdf(0.0, 0.0, 1.0), -0.918939, 1e-6);
  EXPECT_NEAR(dist::normal_log_pdf(1.96, 0.0, 1.0), -2.839739, 1e-6);
  for (double s : {0.1, 1.0, 7.5}) {
    EXPECT_NEAR(dist::half_normal_log_pdf(0.0, s), std::log(2.0) - half_log_2pi - std::log(s), 1e-14);
  }
  EXPECT_EQ(dist::half_normal_log_pdf(-0.1, 1.0), dist::kNegInf);
}

TEST(Uniform, Density) {
  EXPECT_NEAR(dist::uniform_log_pdf(0.3, 0.0, 1.0), 0.0, 1e-15);
  EXPECT_NEAR(dist::uniform_log_pdf(0.1, 0.0, 0.15), -std::log(0.15), 1e-14);
  EXPECT_EQ(dist::uniform_log_pdf(0.2, 0.0, 0.15), dist::kNegInf);
}

TEST(Links, Examples) {
  EXPECT_EQ(dist::logit(0.5), 0.0);
  EXPECT_EQ(dist::expit(0.0), 0.5);
  EXPECT_NEAR(dist::logit(0.75), std::log(3.0), 1e-15);
  EXPECT_EQ(dist::logit(0.0), -std::numeric_limits<double>::infinity());
  EXPECT_EQ(dist::logit(1.0), std::numeric_limits<double>::infinity());
}

TEST(Links, MutuallyInverseOnGrid) {
  for (int i = 0; i < 1000; ++i) {
    const double p = 1e-12 + (1.0 - 2e-12) * (i + 0.5) / 1000.0;
    EXPECT_NEAR(dist::expit(dist::logit(p)), p, 1e-12);
  }
  EXPECT_GT(dist::expit(800.0), 0.0);
  EXPECT_LT(dist::expit(-800.0), 1e-300);
}
