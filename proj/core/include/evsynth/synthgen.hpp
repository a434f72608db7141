#pragma once

// Synthetic ground truth and data from a graph's own generative process,
// closed-form oracles for validation, and simulation-based calibration.

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evsynth/graph.hpp"
#include "evsynth/sampler.hpp"

namespace evsynth::synth {

struct GroundTruth {
  Values values;  // every node evaluated; data slots NaN
  std::uint64_t seed = 0;
};

/// Independent draw from every prior, hierarchies top-down.
GroundTruth sample_prior(const ParameterGraph& graph, std::uint64_t seed);

/// Sample size per data node, in data_nodes() order: binomial n, Poisson
/// exposure (offset) and multinomial total. A multinomial node linked to a
/// Poisson total takes its size from the simulated total instead.
struct Design {
  std::vector<std::uint64_t> n;
  std::vector<double> exposure;
};

/// The sizes recorded in the graph's current observations.
Design design_of(const ParameterGraph& graph);
/// Every binomial denominator and multinomial total set to `n`; Poisson
/// exposures kept.
Design uniform_design(const ParameterGraph& graph, std::uint64_t n);

struct SimulationOptions {
  /// Multiplies every binomial probability (clamped at 1); 1 is faithful.
  double binomial_distortion = 1.0;
};

/// Draws each observation from its declared family at psi(truth).
std::vector<DataItem> simulate_dataset(const ParameterGraph& graph, const GroundTruth& truth, const Design& design,
                                       std::uint64_t seed, const SimulationOptions& options = {});

/// `quantity,value` for every basic node and monitored functional.
std::string format_truth_csv(const ParameterGraph& graph, const GroundTruth& truth);
/// Reads `quantity,value` rows back; throws ParseError on malformed rows.
std::vector<std::pair<std::string, double>> parse_truth_csv(std::string_view text);

struct BetaParams {
  double a = 1.0;
  double b = 1.0;
  double mean() const { return a / (a + b); }
  double variance() const { return a * b / ((a + b) * (a + b) * (a + b + 1.0)); }
  double cdf(double x) const;
};

/// Beta(x + 1, n - x + 1): the posterior of a uniform-prior binomial cell.
BetaParams conjugate_posterior_oracle(std::uint64_t x, std::uint64_t n);

struct ChainSolution {
  double s = 1.0;
  double u = 0.0;
  double d = 0.0;
};

/// Closed-form solution of ds/dt = -a s, du/dt = a s - b u, dd/dt = b u from
/// (1, 0, 0); the a = b case uses the limit u = a t e^{-a t}.
ChainSolution linear_chain_oracle(double alpha, double beta, double t);

/// Two-sided one-sample Kolmogorov-Smirnov statistic of `sample` against a cdf.
template <class Cdf>
double ks_statistic(std::vector<double> sample, Cdf cdf);

/// Asymptotic 1% critical value of the one-sample KS statistic.
double ks_critical_1pct(std::size_t n);

/// Pearson chi-square test of equal bin frequencies; returns the p-value.
double chi_square_uniform_pvalue(std::span<const std::size_t> counts);

struct SbcRun {
  std::vector<std::string> quantities;          // basic node labels
  std::vector<std::vector<std::size_t>> ranks;  // per replication, per quantity
  std::size_t draws_per_rank = 0;               // ranks lie in [0, draws_per_rank]
  std::size_t failures = 0;                     // replications whose fit failed
  std::vector<std::string> failure_messages;

  /// Per-quantity chi-square p-values over `bins` equal rank bins.
  std::vector<double> uniformity_pvalues(std::size_t bins = 10) const;
  /// Bonferroni: every quantity's p-value is at least alpha / quantities.
  bool passes(double alpha = 0.01, std::size_t bins = 10) const;
};

struct SbcSettings {
  std::size_t replications = 100;
  std::size_t draws_per_rank = 99;
  std::uint64_t seed = 1;
  mcmc::SamplerConfig sampler;
  SimulationOptions simulation;
};

/// Per replication: draw a truth, simulate data under `design`, fit, and rank
/// the truth of every basic parameter among thinned posterior draws.
SbcRun run_sbc(const ParameterGraph& graph, const Design& design, const SbcSettings& settings);

template <class Cdf>
double ks_statistic(std::vector<double> sample, Cdf cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

}  // namespace evsynth::synth
