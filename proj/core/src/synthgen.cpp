#include "evsynth/synthgen.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <charconv>
#include <cmath>
#include <numeric>

#include "evsynth/graph_io.hpp"
#include "evsynth/rng.hpp"

namespace evsynth::synth {

GroundTruth sample_prior(const ParameterGraph& graph, std::uint64_t seed) {
  Rng rng = make_stream(seed, 0);
  GroundTruth t;
  t.seed = seed;
  t.values = mcmc::draw_from_prior(graph, rng);
  return t;
}

Design design_of(const ParameterGraph& graph) {
  Design d;
  for (NodeId id : graph.data_nodes()) {
    const auto& obs = graph.data(id).observation;
    switch (obs.family) {
      case Likelihood::binomial: d.n.push_back(obs.n); break;
      case Likelihood::poisson: d.n.push_back(0); break;
      case Likelihood::multinomial:
        d.n.push_back(std::accumulate(obs.counts.begin(), obs.counts.end(), std::uint64_t{0}));
        break;
    }
    d.exposure.push_back(obs.offset);
  }
  return d;
}

Design uniform_design(const ParameterGraph& graph, std::uint64_t n) {
  Design d = design_of(graph);
  for (std::size_t i = 0; i < d.n.size(); ++i) {
    if (graph.data(graph.data_nodes()[i]).observation.family != Likelihood::poisson) d.n[i] = n;
  }
  return d;
}

std::vector<DataItem> simulate_dataset(const ParameterGraph& graph, const GroundTruth& truth, const Design& design,
                                       std::uint64_t seed, const SimulationOptions& options) {
  const auto& ids = graph.data_nodes();
  if (design.n.size() != ids.size() || design.exposure.size() != ids.size()) {
    throw std::invalid_argument("design must cover every data node");
  }
  Rng rng = make_stream(seed, 1);
  std::vector<DataItem> out;
  std::vector<std::uint64_t> simulated_total(graph.size(), 0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const DataNode& node = graph.data(ids[i]);
    DataItem item = node.observation;
    auto value = [&](std::size_t k) { return truth.values[node.targets[k].index]; };
    switch (item.family) {
      case Likelihood::binomial: {
        item.n = design.n[i];
        const double p = std::clamp(value(0) * options.binomial_distortion, 0.0, 1.0);
        item.x = draw::binomial(rng, item.n, p);
        break;
      }
      case Likelihood::poisson:
        item.offset = design.exposure[i];
        item.x = draw::poisson(rng, std::max(0.0, value(0) * item.offset));
        simulated_total[ids[i].index] = item.x;
        break;
      case Likelihood::multinomial: {
        std::vector<double> p(node.targets.size());
        for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::max(0.0, value(k));
        const double total = std::accumulate(p.begin(), p.end(), 0.0);
        for (double& q : p) q /= total;
        const std::uint64_t n = node.total_from ? simulated_total[node.total_from->index] : design.n[i];
        item.counts = draw::multinomial(rng, n, p);
        item.n = n;
        break;
      }
    }
    out.push_back(std::move(item));
  }
  return out;
}

std::string format_truth_csv(const ParameterGraph& graph, const GroundTruth& truth) {
  std::string out = "quantity,value\n";
  std::vector<NodeId> ids = graph.basic_nodes();
  for (NodeId id : graph.monitored()) {
    if (graph.kind(id) != NodeKind::basic) ids.push_back(id);
  }
  for (NodeId id : ids) out += graph.label(id) + "," + format_double(truth.values[id.index]) + "\n";
  return out;
}

std::vector<std::pair<std::string, double>> parse_truth_csv(std::string_view text) {
  std::vector<std::pair<std::string, double>> out;
  std::size_t line = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view row = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line;
    if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
    if (row.empty() || row == "quantity,value") continue;
    const auto comma = row.find(',');
    if (comma == std::string_view::npos || row.find(',', comma + 1) != std::string_view::npos) {
      throw ParseError("truth line " + std::to_string(line) + ": expected quantity,value");
    }
    const std::string_view v = row.substr(comma + 1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
      throw ParseError("truth line " + std::to_string(line) + ": bad value '" + std::string(v) + "'");
    }
    out.emplace_back(std::string(row.substr(0, comma)), value);
  }
  return out;
}

double BetaParams::cdf(double x) const {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return boost::math::ibeta(a, b, x);
}

BetaParams conjugate_posterior_oracle(std::uint64_t x, std::uint64_t n) {
  if (x > n) throw std::invalid_argument("conjugate oracle needs x <= n");
  return {static_cast<double>(x) + 1.0, static_cast<double>(n - x) + 1.0};
}

ChainSolution linear_chain_oracle(double alpha, double beta, double t) {
  ChainSolution c;
  c.s = std::exp(-alpha * t);
  if (std::abs(alpha - beta) < 1e-12 * std::max(1.0, std::abs(alpha))) {
    c.u = alpha * t * std::exp(-alpha * t);
  } else {
    c.u = alpha / (beta - alpha) * (std::exp(-alpha * t) - std::exp(-beta * t));
  }
  c.d = 1.0 - c.s - c.u;
  return c;
}

double ks_critical_1pct(std::size_t n) { return 1.62762 / std::sqrt(static_cast<double>(n)); }

double chi_square_uniform_pvalue(std::span<const std::size_t> counts) {
  if (counts.size() < 2) throw std::invalid_argument("chi-square test needs at least two bins");
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  if (!(total > 0.0)) throw std::invalid_argument("chi-square test on empty counts");
  const double expected = total / static_cast<double>(counts.size());
  double chi2 = 0.0;
  for (std::size_t c : counts) chi2 += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
  const double df = static_cast<double>(counts.size() - 1);
  return boost::math::gamma_q(df / 2.0, chi2 / 2.0);
}

std::vector<double> SbcRun::uniformity_pvalues(std::size_t bins) const {
  std::vector<double> out;
  const std::size_t values = draws_per_rank + 1;
  if (values % bins != 0) throw std::invalid_argument("rank range must split evenly into bins");
  for (std::size_t q = 0; q < quantities.size(); ++q) {
    std::vector<std::size_t> counts(bins, 0);
    for (const auto& rep : ranks) ++counts[rep[q] * bins / values];
    out.push_back(chi_square_uniform_pvalue(counts));
  }
  return out;
}

bool SbcRun::passes(double alpha, std::size_t bins) const {
  const auto p = uniformity_pvalues(bins);
  const double threshold = alpha / static_cast<double>(p.size());
  return std::all_of(p.begin(), p.end(), [&](double v) { return v >= threshold; });
}

SbcRun run_sbc(const ParameterGraph& graph, const Design& design, const SbcSettings& settings) {
  SbcRun run;
  run.draws_per_rank = settings.draws_per_rank;
  const auto& basics = graph.basic_nodes();
  for (NodeId id : basics) run.quantities.push_back(graph.label(id));
  for (std::size_t rep = 0; rep < settings.replications; ++rep) {
    const std::uint64_t rep_seed = derive_seed(settings.seed, rep);
    const GroundTruth truth = sample_prior(graph, rep_seed);
    try {
      const ParameterGraph fitted = graph.with_observations(simulate_dataset(graph, truth, design, rep_seed, settings.simulation));
      mcmc::SamplerConfig sc = settings.sampler;
      sc.seed = rep_seed;
      const auto chains = mcmc::run_chains(fitted, sc, basics);
      std::vector<std::size_t> ranks;
      for (std::size_t q = 0; q < basics.size(); ++q) {
        std::vector<double> all;
        for (const auto& c : chains) {
          const auto col = c.column(q);
          all.insert(all.end(), col.begin(), col.end());
        }
        if (all.size() < settings.draws_per_rank) throw std::runtime_error("too few retained draws for ranking");
        // Evenly thinned draws reduce autocorrelation before ranking.
        const double stride = static_cast<double>(all.size()) / static_cast<double>(settings.draws_per_rank);
        std::size_t rank = 0;
        for (std::size_t k = 0; k < settings.draws_per_rank; ++k) {
          if (all[static_cast<std::size_t>(static_cast<double>(k) * stride)] < truth.values[basics[q].index]) ++rank;
        }
        ranks.push_back(rank);
      }
      run.ranks.push_back(std::move(ranks));
    } catch (const std::exception& e) {
      ++run.failures;
      run.failure_messages.push_back("replication " + std::to_string(rep) + ": " + e.what());
    }
  }
  return run;
}

}  // namespace evsynth::synth
