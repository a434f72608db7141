#pragma once

// Adaptive random-walk Metropolis-within-Gibbs over the basic parameters of
// a frozen ParameterGraph. Each block is proposed on an unconstrained scale
// (logit for bounded scalars, log for positive ones, additive log-ratio for
// simplex blocks) with the Jacobian included in the acceptance ratio.
// Proposal scales follow a Robbins-Monro recursion during burn-in only.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "evsynth/graph.hpp"
#include "evsynth/rng.hpp"

namespace evsynth::mcmc {

struct SamplerConfig {
  std::size_t chains = 2;
  std::size_t iterations = 14000;
  std::size_t burn_in = 10000;
  std::size_t thin = 1;
  double target_acceptance = 0.44;          // scalar blocks
  double target_acceptance_simplex = 0.234; // simplex blocks
  std::uint64_t seed = 1;
  std::size_t adaptation_window = 50;
  std::size_t max_init_attempts = 100;
  bool parallel = true;

  std::size_t retained_per_chain() const { return iterations > burn_in ? (iterations - burn_in) / thin : 0; }
  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

enum class BlockKind { scalar_logit, scalar_log, scalar_identity, simplex };
std::string_view block_kind_name(BlockKind k);

struct BlockSpec {
  std::vector<NodeId> members;
  BlockKind kind = BlockKind::scalar_identity;
  double scale = 1.0;
  double lower = 0.0;  // bounds of scalar_logit blocks
  double upper = 1.0;
};

/// One block per scalar basic node and one per simplex block. Bounded
/// scalars (unit interval, or a uniform prior) use logit, positive ones log.
std::vector<BlockSpec> default_blocks(const ParameterGraph& graph);

class SamplerError : public std::runtime_error {
 public:
  enum class Kind { no_free_parameters, initialization, solver };
  SamplerError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct ChainOutput {
  std::size_t chain = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t stream_seed = 0;  // derive_seed(master_seed, chain)
  std::vector<std::string> quantities;
  std::vector<NodeId> monitors;
  std::vector<double> draws;  // row-major, rows x quantities
  std::size_t rows = 0;
  std::vector<double> acceptance;            // per block, post burn-in
  std::vector<double> scales_after_burn_in;  // per block
  std::vector<double> final_scales;          // per block
  std::size_t init_attempts = 0;

  std::size_t columns() const { return quantities.size(); }
  double at(std::size_t row, std::size_t col) const { return draws[row * columns() + col]; }
  std::vector<double> column(std::size_t col) const;
  /// Column index of a quantity label; throws std::out_of_range.
  std::size_t column_of(std::string_view quantity) const;
};

/// Draws every basic node from its prior (hierarchies top-down, Dirichlet
/// via gamma draws) and evaluates all functionals. Draws outside a node's
/// support are redrawn.
Values draw_from_prior(const ParameterGraph& graph, Rng& rng);

/// Runs config.chains independent chains, each from its own prior draw.
/// `monitors` defaults to graph.monitored(); `blocks` to default_blocks().
std::vector<ChainOutput> run_chains(const ParameterGraph& graph, const SamplerConfig& config,
                                    std::span<const NodeId> monitors = {}, std::vector<BlockSpec> blocks = {});

/// One chain; run_chains calls this once per chain index.
ChainOutput run_chain(const ParameterGraph& graph, const SamplerConfig& config, std::size_t chain,
                      std::span<const NodeId> monitors, const std::vector<BlockSpec>& blocks);

/// Per-chain sample file: header of quantity labels, one row per draw.
std::string format_samples_csv(const ChainOutput& chain);

}  // namespace evsynth::mcmc
