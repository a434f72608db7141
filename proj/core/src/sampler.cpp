#include "evsynth/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "evsynth/distributions.hpp"
#include "evsynth/graph_io.hpp"

namespace evsynth::mcmc {

namespace {

constexpr double kInitialScalarScale = 0.5;
constexpr double kInitialSimplexScale = 0.3;

bool bounded_prior(const BasicParameterNode& node, double& lo, double& hi) {
  if (node.prior.family == PriorSpec::Family::uniform) {
    lo = node.prior.parameters[0];
    hi = node.prior.parameters[1];
    if (node.support == Support::unit_interval) {
      lo = std::max(lo, 0.0);
      hi = std::min(hi, 1.0);
    }
    if (node.support == Support::positive_real) lo = std::max(lo, 0.0);
    return true;
  }
  if (node.support == Support::unit_interval) {
    lo = 0.0;
    hi = 1.0;
    return true;
  }
  return false;
}

double draw_scalar(const BasicParameterNode& node, const Values& v, Rng& rng) {
  const auto& a = node.prior.parameters;
  switch (node.prior.family) {
    case PriorSpec::Family::uniform: return draw::uniform(rng, a[0], a[1]);
    case PriorSpec::Family::normal: return draw::normal(rng, a[0], a[1]);
    case PriorSpec::Family::half_normal: return draw::half_normal(rng, a[0]);
    case PriorSpec::Family::hierarchical_normal:
      return draw::normal(rng, v[node.prior.mean_parent.index], v[node.prior.sd_parent.index]);
    case PriorSpec::Family::dirichlet: break;
  }
  throw GraphError("scalar draw requested for a simplex component");
}

bool strictly_inside(Support s, double x) {
  switch (s) {
    case Support::unit_interval:
    case Support::simplex_component: return x > 0.0 && x < 1.0;
    case Support::positive_real: return x > 0.0 && std::isfinite(x);
    case Support::real: return std::isfinite(x);
  }
  return false;
}

/// Chain-local state of one block: its local terms and the value slots a
/// proposal may overwrite.
struct BlockState {
  BlockSpec spec;
  LocalTerms terms;
  std::vector<std::uint32_t> touched;
  double log_scale = 0.0;
  std::size_t accepted = 0;
  std::size_t proposed = 0;
  std::size_t window_accepted = 0;
  std::size_t window_proposed = 0;
};

std::vector<std::uint32_t> touched_slots(const ParameterGraph& g, const BlockSpec& spec, const LocalTerms& t) {
  std::vector<std::uint32_t> out;
  for (NodeId m : spec.members) out.push_back(m.index);
  for (const EvalStep& s : t.steps) {
    if (s.kind == EvalStep::Kind::functional) {
      out.push_back(s.index);
    } else {
      for (NodeId o : g.vector_functions()[s.index].outputs) out.push_back(o.index);
    }
  }
  return out;
}

/// log |d(original) / d(transformed)| at the current block values.
double log_jacobian(const BlockSpec& b, const Values& v) {
  switch (b.kind) {
    case BlockKind::scalar_logit: {
      const double x = v[b.members[0].index];
      return std::log(x - b.lower) + std::log(b.upper - x);
    }
    case BlockKind::scalar_log: return std::log(v[b.members[0].index]);
    case BlockKind::scalar_identity: return 0.0;
    case BlockKind::simplex: {
      double s = 0.0;
      for (NodeId m : b.members) s += std::log(v[m.index]);
      return s;
    }
  }
  return 0.0;
}

/// Writes a proposal into v; returns false if it lands on a boundary.
bool propose(const BlockSpec& b, double scale, Values& v, Rng& rng) {
  switch (b.kind) {
    case BlockKind::scalar_logit: {
      const double x = v[b.members[0].index];
      const double z = dist::logit((x - b.lower) / (b.upper - b.lower)) + scale * draw::normal(rng);
      const double y = b.lower + (b.upper - b.lower) * dist::expit(z);
      v[b.members[0].index] = y;
      return y > b.lower && y < b.upper;
    }
    case BlockKind::scalar_log: {
      const double y = v[b.members[0].index] * std::exp(scale * draw::normal(rng));
      v[b.members[0].index] = y;
      return y > 0.0 && std::isfinite(y);
    }
    case BlockKind::scalar_identity: {
      v[b.members[0].index] += scale * draw::normal(rng);
      return std::isfinite(v[b.members[0].index]);
    }
    case BlockKind::simplex: {
      const std::size_t k = b.members.size();
      const double ref_log = std::log(v[b.members[k - 1].index]);
      std::vector<double> y(k, 0.0);
      double top = 0.0;
      for (std::size_t i = 0; i + 1 < k; ++i) {
        y[i] = std::log(v[b.members[i].index]) - ref_log + scale * draw::normal(rng);
        top = std::max(top, y[i]);
      }
      double total = 0.0;
      for (double& yi : y) {
        yi = std::exp(yi - top);
        total += yi;
      }
      bool inside = true;
      for (std::size_t i = 0; i < k; ++i) {
        const double p = y[i] / total;
        v[b.members[i].index] = p;
        inside = inside && p > 0.0;
      }
      return inside;
    }
  }
  return false;
}

double target_for(const SamplerConfig& c, const BlockSpec& b) {
  return b.kind == BlockKind::simplex ? c.target_acceptance_simplex : c.target_acceptance;
}

}  // namespace

void SamplerConfig::validate() const {
  if (chains < 1) throw std::invalid_argument("at least one chain is required");
  if (iterations <= burn_in) throw std::invalid_argument("iterations must exceed burn-in");
  if (thin < 1) throw std::invalid_argument("thinning must be at least 1");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0) ||
      !(target_acceptance_simplex > 0.0 && target_acceptance_simplex < 1.0)) {
    throw std::invalid_argument("target acceptance must lie in (0, 1)");
  }
  if (adaptation_window < 1) throw std::invalid_argument("adaptation window must be at least 1");
  if (retained_per_chain() < 1) throw std::invalid_argument("no draws would be retained");
}

std::string_view block_kind_name(BlockKind k) {
  switch (k) {
    case BlockKind::scalar_logit: return "scalar-logit";
    case BlockKind::scalar_log: return "scalar-log";
    case BlockKind::scalar_identity: return "scalar-identity";
    case BlockKind::simplex: return "simplex";
  }
  return "?";
}

std::vector<BlockSpec> default_blocks(const ParameterGraph& graph) {
  std::vector<BlockSpec> blocks;
  for (NodeId id : graph.basic_nodes()) {
    if (graph.block_of(id)) continue;
    const auto& node = graph.basic(id);
    BlockSpec b;
    b.members = {id};
    b.scale = kInitialScalarScale;
    if (bounded_prior(node, b.lower, b.upper)) {
      b.kind = BlockKind::scalar_logit;
    } else if (node.support == Support::positive_real) {
      b.kind = BlockKind::scalar_log;
    } else {
      b.kind = BlockKind::scalar_identity;
    }
    blocks.push_back(std::move(b));
  }
  for (const auto& sb : graph.simplex_blocks()) {
    BlockSpec b;
    b.members = sb.members;
    b.kind = BlockKind::simplex;
    b.scale = kInitialSimplexScale / std::sqrt(static_cast<double>(sb.members.size() - 1));
    blocks.push_back(std::move(b));
  }
  return blocks;
}

std::vector<double> ChainOutput::column(std::size_t col) const {
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = at(r, col);
  return out;
}

std::size_t ChainOutput::column_of(std::string_view quantity) const {
  for (std::size_t j = 0; j < quantities.size(); ++j) {
    if (quantities[j] == quantity) return j;
  }
  throw std::out_of_range("quantity '" + std::string(quantity) + "' is not monitored");
}

Values draw_from_prior(const ParameterGraph& graph, Rng& rng) {
  Values v = graph.initial_values();
  // Basic nodes are stored in insertion order, so hierarchy parents come
  // before their children.
  for (NodeId id : graph.basic_nodes()) {
    if (graph.block_of(id)) continue;
    const auto& node = graph.basic(id);
    double x = draw_scalar(node, v, rng);
    for (int attempt = 0; !strictly_inside(node.support, x); ++attempt) {
      if (attempt >= 1000) throw SamplerError(SamplerError::Kind::initialization, "cannot draw '" + node.label + "' inside its support");
      x = draw_scalar(node, v, rng);
    }
    v[id.index] = x;
  }
  for (const auto& sb : graph.simplex_blocks()) {
    std::vector<double> p;
    for (int attempt = 0;; ++attempt) {
      p = draw::dirichlet(rng, sb.concentration);
      if (std::all_of(p.begin(), p.end(), [](double q) { return q > 0.0; })) break;
      if (attempt >= 1000) throw SamplerError(SamplerError::Kind::initialization, "cannot draw simplex '" + sb.label + "'");
    }
    for (std::size_t i = 0; i < p.size(); ++i) v[sb.members[i].index] = p[i];
  }
  evaluate_steps(graph, graph.evaluation_order(), v);
  return v;
}

ChainOutput run_chain(const ParameterGraph& graph, const SamplerConfig& config, std::size_t chain,
                      std::span<const NodeId> monitors, const std::vector<BlockSpec>& blocks) {
  ChainOutput out;
  out.chain = chain;
  out.master_seed = config.seed;
  out.stream_seed = derive_seed(config.seed, chain);
  Rng rng(out.stream_seed);
  for (NodeId m : monitors) {
    out.monitors.push_back(m);
    out.quantities.push_back(graph.label(m));
  }

  // Initial state from the prior.
  Values v;
  bool ok = false;
  for (std::size_t attempt = 1; attempt <= config.max_init_attempts; ++attempt) {
    out.init_attempts = attempt;
    v = draw_from_prior(graph, rng);
    if (evaluate_steps(graph, graph.evaluation_order(), v) != EvalError::none) continue;
    if (std::isfinite(log_prior(graph, v) + log_likelihood(graph, v))) {
      ok = true;
      break;
    }
  }
  if (!ok) {
    throw SamplerError(SamplerError::Kind::initialization,
                       "log density not finite at any of " + std::to_string(config.max_init_attempts) +
                           " prior draws (chain " + std::to_string(chain) + ")");
  }

  std::vector<BlockState> state;
  for (const auto& spec : blocks) {
    BlockState s;
    s.spec = spec;
    s.terms = graph.local_terms(spec.members, true);
    s.touched = touched_slots(graph, spec, s.terms);
    s.log_scale = std::log(spec.scale);
    state.push_back(std::move(s));
  }
  // Steps skipped during sampling (no data depends on them), run per draw.
  std::vector<EvalStep> unobserved;
  {
    const auto needed = graph.observed_ancestors();
    for (const EvalStep& s : graph.evaluation_order()) {
      bool skip = true;
      if (s.kind == EvalStep::Kind::functional) {
        skip = !needed[s.index];
      } else {
        for (NodeId o : graph.vector_functions()[s.index].outputs) skip = skip && !needed[o.index];
      }
      if (skip) unobserved.push_back(s);
    }
  }

  out.rows = config.retained_per_chain();
  out.draws.reserve(out.rows * out.columns());
  std::vector<double> saved;
  std::size_t window = 0;

  for (std::size_t iter = 0; iter < config.iterations; ++iter) {
    const bool burning = iter < config.burn_in;
    for (auto& b : state) {
      const double old_density = local_log_density(graph, b.terms, v) + log_jacobian(b.spec, v);
      saved.resize(b.touched.size());
      for (std::size_t i = 0; i < b.touched.size(); ++i) saved[i] = v[b.touched[i]];

      bool accept = propose(b.spec, std::exp(b.log_scale), v, rng);
      double log_u = std::log(draw::uniform(rng));
      if (accept) {
        const EvalError err = evaluate_steps(graph, b.terms.steps, v);
        if (err == EvalError::none) {
          const double new_density = local_log_density(graph, b.terms, v) + log_jacobian(b.spec, v);
          accept = std::isfinite(new_density) && log_u < new_density - old_density;
        } else {
          accept = false;
        }
      }
      if (!accept) {
        for (std::size_t i = 0; i < b.touched.size(); ++i) v[b.touched[i]] = saved[i];
      }
      ++b.window_proposed;
      if (accept) ++b.window_accepted;
      if (!burning) {
        ++b.proposed;
        if (accept) ++b.accepted;
      }
    }

    if (burning && (iter + 1) % config.adaptation_window == 0) {
      ++window;
      const double gain = std::min(1.0, 3.0 / std::sqrt(static_cast<double>(window)));
      for (auto& b : state) {
        const double rate = static_cast<double>(b.window_accepted) / static_cast<double>(b.window_proposed);
        b.log_scale += gain * (rate - target_for(config, b.spec));
        b.log_scale = std::clamp(b.log_scale, std::log(1e-6), std::log(50.0));
      }
    }
    if (burning) {
      if ((iter + 1) % config.adaptation_window == 0) {
        for (auto& b : state) b.window_accepted = b.window_proposed = 0;
      }
      if (iter + 1 == config.burn_in) {
        for (auto& b : state) out.scales_after_burn_in.push_back(std::exp(b.log_scale));
      }
      continue;
    }
    if ((iter + 1 - config.burn_in) % config.thin == 0 && out.draws.size() < out.rows * out.columns()) {
      if (!unobserved.empty() && evaluate_steps(graph, unobserved, v) != EvalError::none) {
        throw SamplerError(SamplerError::Kind::solver, "evaluating monitored quantities failed");
      }
      for (NodeId m : out.monitors) out.draws.push_back(v[m.index]);
    }
  }
  if (config.burn_in == 0) {
    for (auto& b : state) out.scales_after_burn_in.push_back(std::exp(b.log_scale));
  }
  for (auto& b : state) {
    out.final_scales.push_back(std::exp(b.log_scale));
    out.acceptance.push_back(b.proposed ? static_cast<double>(b.accepted) / static_cast<double>(b.proposed) : 0.0);
  }
  return out;
}

std::vector<ChainOutput> run_chains(const ParameterGraph& graph, const SamplerConfig& config,
                                    std::span<const NodeId> monitors, std::vector<BlockSpec> blocks) {
  config.validate();
  if (graph.free_parameter_count() == 0) {
    throw SamplerError(SamplerError::Kind::no_free_parameters, "graph has no free parameters");
  }
  std::vector<NodeId> monitor_ids(monitors.begin(), monitors.end());
  if (monitor_ids.empty()) monitor_ids = graph.monitored();
  if (blocks.empty()) blocks = default_blocks(graph);

  std::vector<ChainOutput> out(config.chains);
  std::vector<std::exception_ptr> errors(config.chains);
  auto work = [&](std::size_t c) {
    try {
      out[c] = run_chain(graph, config, c, monitor_ids, blocks);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (config.parallel && config.chains > 1) {
    std::vector<std::thread> threads;
    for (std::size_t c = 0; c < config.chains; ++c) threads.emplace_back(work, c);
    for (auto& t : threads) t.join();
  } else {
    for (std::size_t c = 0; c < config.chains; ++c) work(c);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::string format_samples_csv(const ChainOutput& chain) {
  std::string out;
  for (std::size_t j = 0; j < chain.columns(); ++j) out += (j ? "," : "") + chain.quantities[j];
  out += "\n";
  for (std::size_t r = 0; r < chain.rows; ++r) {
    for (std::size_t j = 0; j < chain.columns(); ++j) {
      if (j) out += ",";
      out += format_double(chain.at(r, j));
    }
    out += "\n";
  }
  return out;
}

}  // namespace evsynth::mcmc
