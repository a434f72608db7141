#pragma once

// Convergence diagnostics and posterior summaries over sampler output.

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "evsynth/sampler.hpp"

namespace evsynth::mcmc {

class DiagnosticError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Classic (unsplit) potential scale reduction
/// sqrt(((n-1)/n W + B/n) / W). Needs >= 2 chains of equal length >= 2 and
/// positive within-chain variance.
double gelman_rubin(std::span<const std::vector<double>> chains);

/// Geyer initial-positive-sequence estimate, clipped to n. Needs n >= 10 and
/// a non-constant series.
double effective_sample_size(std::span<const double> samples);

/// Type-7 (linear interpolation) sample quantile of sorted data.
double quantile_sorted(std::span<const double> sorted, double p);

struct PosteriorSummary {
  std::string quantity;
  double median = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  double rhat = 0.0;  // NaN when unavailable (one chain, constant draws)
  double ess = 0.0;   // sum of per-chain ESS; NaN for constant draws
};

/// Pooled summary of one monitored quantity. Throws std::out_of_range for
/// an unmonitored quantity.
PosteriorSummary summarize(std::span<const ChainOutput> chains, std::string_view quantity);
std::vector<PosteriorSummary> summarize_all(std::span<const ChainOutput> chains);

/// Pooled draws of one quantity across chains.
std::vector<double> pooled(std::span<const ChainOutput> chains, std::string_view quantity);

/// `quantity,median,mean,sd,q025,q975,rhat,ess`
std::string format_summary_csv(std::span<const PosteriorSummary> rows);
/// `quantity,rhat,ess,status` with status ok / not-converged / unavailable.
std::string format_diagnostics_csv(std::span<const PosteriorSummary> rows, double rhat_threshold);

struct DensityStrip {
  std::string quantity;
  std::vector<double> midpoints;
  std::vector<double> heights;  // normalised: sum(height * width) = 1
  double lower = 0.0;
  double upper = 0.0;
  double width = 0.0;
  double median = 0.0;
};

/// Histogram over [min, max] of the pooled draws (a point mass v uses
/// [v - 0.5, v + 0.5]). Throws std::invalid_argument for bins < 10.
DensityStrip export_density_strip(std::span<const ChainOutput> chains, std::string_view quantity, std::size_t bins);
/// `midpoint,density,median`
std::string format_strip_csv(const DensityStrip& strip);

}  // namespace evsynth::mcmc
