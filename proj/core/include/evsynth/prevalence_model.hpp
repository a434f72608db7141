#pragma once

// Builds the prevalence model graph from a ModelConfig:
//   rho    Dirichlet simplex per (gender, region)
//   pi     uniform(0,1) per cell; for heterosexual men with a female
//   delta  counterpart and the hierarchy on, logit(male) = lor + logit(female)
//          with lor ~ normal(P_family, sigma), P_family ~ normal(Pi, omega),
//          Pi ~ normal(0, top_sd^2), sigma/omega half-normal
//   nu     under-reporting per (gender, group) when diagnosed counts exist
// plus one data node per binomial/Poisson record and one multinomial node per
// group split.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evsynth/graph.hpp"
#include "evsynth/model_config.hpp"
#include "evsynth/prevalence.hpp"

namespace evsynth::prevalence {

struct CellNodes {
  std::optional<NodeId> rho;
  std::optional<NodeId> pi;
  std::optional<NodeId> delta;
  std::optional<NodeId> lor_pi;
  std::optional<NodeId> lor_delta;
};

struct PrevalenceModel {
  ParameterGraph graph;
  ModelConfig config;
  GroupRegionTable<CellNodes> cells{};
  std::array<std::optional<NodeId>, kGroupCount> nu{};
  std::vector<NodeId> hyperparameters;
  std::map<std::string, NodeId, std::less<>> bias_epsilon;  // per source
  /// Data node and the config.data rows it was built from.
  std::vector<std::pair<NodeId, std::vector<std::size_t>>> data_rows;

  /// Free (rho, pi, delta) dimension: basic rho/pi/delta/lor nodes minus one
  /// per rho simplex. 111 for the full model.
  std::size_t theta_dimension() const;

  /// Reads (rho, pi, delta, N) out of an evaluated assignment; cells outside
  /// the model stay zero.
  PrevalenceParams params(const Values& values) const;
  BiasParams bias(const Values& values) const;

  /// config.data with counts replaced by `observations` (one per data node,
  /// in data_nodes() order). Multinomial counts go back to their split rows.
  std::vector<DataRecord> records_with(std::span<const DataItem> observations) const;
};

/// Throws ConfigError(semantic) on records referencing undefined cells.
PrevalenceModel build_prevalence_graph(const ModelConfig& config);

}  // namespace evsynth::prevalence
