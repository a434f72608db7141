#include "evsynth/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "evsynth/graph_io.hpp"

namespace evsynth::mcmc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size()); }

double variance_of(std::span<const double> x, double mean) {
  double s = 0.0;
  for (double v : x) s += (v - mean) * (v - mean);
  return s / static_cast<double>(x.size() - 1);
}

std::string number_or_na(double v) { return std::isfinite(v) ? format_double(v) : "NA"; }

}  // namespace

double gelman_rubin(std::span<const std::vector<double>> chains) {
  const std::size_t m = chains.size();
  if (m < 2) throw DiagnosticError("R-hat needs at least two chains");
  const std::size_t n = chains[0].size();
  if (n < 2) throw DiagnosticError("R-hat needs chains of length at least 2");
  for (const auto& c : chains) {
    if (c.size() != n) throw DiagnosticError("R-hat needs chains of equal length");
  }
  std::vector<double> means(m);
  double w = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    means[j] = mean_of(chains[j]);
    w += variance_of(chains[j], means[j]);
  }
  w /= static_cast<double>(m);
  if (!(w > 0.0)) throw DiagnosticError("R-hat undefined: zero within-chain variance");
  const double grand = mean_of(means);
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= static_cast<double>(n) / static_cast<double>(m - 1);
  const double nn = static_cast<double>(n);
  return std::sqrt(((nn - 1.0) / nn * w + b / nn) / w);
}

double effective_sample_size(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 10) throw DiagnosticError("ESS needs at least 10 draws");
  const double mu = mean_of(x);
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = x[i] - mu;
  double c0 = 0.0;
  for (double v : d) c0 += v * v;
  if (!(c0 > 0.0)) throw DiagnosticError("ESS undefined for a constant series");
  auto rho = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += d[i] * d[i + lag];
    return s / c0;
  };
  // Sum pairs Gamma_m = rho(2m) + rho(2m+1) while they stay positive.
  double sum = 0.0;
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    const double gamma = rho(2 * m) + rho(2 * m + 1);
    if (!(gamma > 0.0)) break;
    sum += gamma;
  }
  const double tau = -1.0 + 2.0 * sum;
  const double nn = static_cast<double>(n);
  if (!(tau > 0.0)) return nn;
  return std::min(nn, nn / tau);
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> pooled(std::span<const ChainOutput> chains, std::string_view quantity) {
  std::vector<double> all;
  for (const auto& c : chains) {
    const auto col = c.column(c.column_of(quantity));
    all.insert(all.end(), col.begin(), col.end());
  }
  return all;
}

PosteriorSummary summarize(std::span<const ChainOutput> chains, std::string_view quantity) {
  if (chains.empty()) throw std::invalid_argument("no chains to summarize");
  PosteriorSummary s;
  s.quantity = std::string(quantity);
  std::vector<std::vector<double>> per_chain;
  for (const auto& c : chains) per_chain.push_back(c.column(c.column_of(quantity)));
  std::vector<double> all;
  for (const auto& col : per_chain) all.insert(all.end(), col.begin(), col.end());
  if (all.empty()) throw std::invalid_argument("no draws for '" + s.quantity + "'");
  s.mean = mean_of(all);
  s.sd = all.size() > 1 ? std::sqrt(variance_of(all, s.mean)) : 0.0;
  std::sort(all.begin(), all.end());
  s.median = quantile_sorted(all, 0.5);
  s.q025 = quantile_sorted(all, 0.025);
  s.q975 = quantile_sorted(all, 0.975);
  s.rhat = kNaN;
  if (per_chain.size() >= 2) {
    try {
      s.rhat = gelman_rubin(per_chain);
    } catch (const DiagnosticError&) {
    }
  }
  s.ess = 0.0;
  try {
    for (const auto& col : per_chain) s.ess += effective_sample_size(col);
  } catch (const DiagnosticError&) {
    s.ess = kNaN;
  }
  return s;
}

std::vector<PosteriorSummary> summarize_all(std::span<const ChainOutput> chains) {
  std::vector<PosteriorSummary> out;
  if (chains.empty()) return out;
  for (const auto& q : chains[0].quantities) out.push_back(summarize(chains, q));
  return out;
}

std::string format_summary_csv(std::span<const PosteriorSummary> rows) {
  std::string out = "quantity,median,mean,sd,q025,q975,rhat,ess\n";
  for (const auto& r : rows) {
    out += r.quantity + "," + format_double(r.median) + "," + format_double(r.mean) + "," + format_double(r.sd) + "," +
           format_double(r.q025) + "," + format_double(r.q975) + "," + number_or_na(r.rhat) + "," +
           number_or_na(r.ess) + "\n";
  }
  return out;
}

std::string format_diagnostics_csv(std::span<const PosteriorSummary> rows, double rhat_threshold) {
  std::string out = "quantity,rhat,ess,status\n";
  for (const auto& r : rows) {
    const char* status = !std::isfinite(r.rhat) ? "unavailable" : r.rhat < rhat_threshold ? "ok" : "not-converged";
    out += r.quantity + "," + number_or_na(r.rhat) + "," + number_or_na(r.ess) + "," + status + "\n";
  }
  return out;
}

DensityStrip export_density_strip(std::span<const ChainOutput> chains, std::string_view quantity, std::size_t bins) {
  if (bins < 10) throw std::invalid_argument("density strips need at least 10 bins");
  std::vector<double> all = pooled(chains, quantity);
  if (all.empty()) throw std::invalid_argument("no draws for '" + std::string(quantity) + "'");
  std::sort(all.begin(), all.end());
  DensityStrip s;
  s.quantity = std::string(quantity);
  s.median = quantile_sorted(all, 0.5);
  s.lower = all.front();
  s.upper = all.back();
  if (!(s.upper > s.lower)) {
    s.lower -= 0.5;
    s.upper += 0.5;
  }
  s.width = (s.upper - s.lower) / static_cast<double>(bins);
  std::vector<std::size_t> counts(bins, 0);
  for (double v : all) {
    auto k = static_cast<std::size_t>(std::floor((v - s.lower) / s.width));
    ++counts[std::min(k, bins - 1)];
  }
  const double norm = static_cast<double>(all.size()) * s.width;
  for (std::size_t k = 0; k < bins; ++k) {
    s.midpoints.push_back(s.lower + (static_cast<double>(k) + 0.5) * s.width);
    s.heights.push_back(static_cast<double>(counts[k]) / norm);
  }
  return s;
}

std::string format_strip_csv(const DensityStrip& strip) {
  std::string out = "midpoint,density,median\n";
  for (std::size_t k = 0; k < strip.midpoints.size(); ++k) {
    out += format_double(strip.midpoints[k]) + "," + format_double(strip.heights[k]) + "," +
           format_double(strip.median) + "\n";
  }
  return out;
}

}  // namespace evsynth::mcmc
