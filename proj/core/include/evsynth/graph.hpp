#pragma once

// Evidence-synthesis DAG: basic parameters with priors, functional
// parameters defined by closed-form expressions (or by a registered vector
// function such as an ODE solve), and data nodes carrying one likelihood term
// each. Graphs are assembled with GraphBuilder and frozen into an immutable
// ParameterGraph that can be shared by concurrent chains; all mutable state
// lives in chain-local value assignments (std::vector<double> indexed by
// NodeId::index).

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evsynth/expression.hpp"

namespace evsynth {

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Support { unit_interval, positive_real, real, simplex_component };
enum class ValueRange { probability, non_negative, real };
enum class NodeKind { basic, functional, derived, data };

std::string_view support_name(Support s);
std::string_view range_name(ValueRange r);

struct PriorSpec {
  enum class Family { uniform, normal, half_normal, dirichlet, hierarchical_normal };

  Family family = Family::uniform;
  std::vector<double> parameters{0.0, 1.0};
  NodeId mean_parent{};
  NodeId sd_parent{};

  static PriorSpec uniform(double a, double b);
  static PriorSpec normal(double mean, double sd);
  static PriorSpec half_normal(double sd);
  static PriorSpec hierarchical_normal(NodeId mean, NodeId sd);

  /// Throws GraphError on sd <= 0, a >= b or non-positive concentrations.
  void validate() const;
};

struct BasicParameterNode {
  std::string label;
  Support support = Support::unit_interval;
  PriorSpec prior;
  double initial = 0.5;
  std::string role;
  bool monitored = true;
};

struct FunctionalNode {
  std::string label;
  Expr expression;
  ValueRange range = ValueRange::real;
  std::string role;
  bool monitored = false;
};

enum class Likelihood { binomial, poisson, multinomial };

std::string_view likelihood_name(Likelihood f);

struct DataItem {
  Likelihood family = Likelihood::binomial;
  std::uint64_t x = 0;
  std::uint64_t n = 0;                // binomial denominator
  double offset = 1.0;                // Poisson exposure: mean = target * offset
  std::vector<std::uint64_t> counts;  // multinomial
  std::string source;
};

struct DataNode {
  std::string label;
  std::vector<NodeId> targets;  // one target, or one share per category for multinomial
  DataItem observation;
  // Multinomial split whose total is the realisation of this Poisson node.
  std::optional<NodeId> total_from;
};

/// A multi-output deterministic function of graph values (e.g. an ODE
/// trajectory). Implementations must be pure and thread-safe.
class VectorFunction {
 public:
  virtual ~VectorFunction() = default;
  virtual std::string kind() const = 0;
  virtual std::size_t input_size() const = 0;
  virtual std::size_t output_size() const = 0;
  virtual std::vector<double> parameters() const = 0;
  virtual EvalError evaluate(std::span<const double> inputs, std::span<double> outputs) const = 0;
  virtual ValueRange output_range() const { return ValueRange::real; }
};

struct VectorFunctionNode {
  std::string label;
  std::shared_ptr<const VectorFunction> function;
  std::vector<NodeId> inputs;
  std::vector<NodeId> outputs;
  bool monitored = true;
};

struct SimplexBlock {
  std::string label;
  std::vector<NodeId> members;
  std::vector<double> concentration;
  std::string role;
};

/// One evaluation step in topological order.
struct EvalStep {
  enum class Kind { functional, vector_function } kind;
  std::uint32_t index;  // NodeId index for functional, vector-function index otherwise
};

/// One additive log-prior term.
struct PriorTerm {
  enum class Kind { scalar, simplex } kind;
  std::uint32_t index;  // NodeId index for scalar, simplex-block index otherwise
};

/// The subset of evaluation steps and log-density terms touched when a set of
/// basic parameters changes.
struct LocalTerms {
  std::vector<EvalStep> steps;
  std::vector<PriorTerm> priors;
  std::vector<NodeId> data;
};

class ParameterGraph {
 public:
  /// Declarations in insertion order (used by serialization).
  struct Declaration {
    enum class Kind { basic, simplex, functional, vector_function, data } kind;
    std::uint32_t index;  // NodeId index, or block / vector-function index
  };
  const std::vector<Declaration>& declarations() const { return declarations_; }

  std::size_t size() const { return kinds_.size(); }
  NodeKind kind(NodeId id) const { return kinds_.at(id.index); }
  const std::string& label(NodeId id) const;
  std::optional<NodeId> find(std::string_view label) const;
  /// Like find, but throws GraphError naming the missing label.
  NodeId at(std::string_view label) const;

  const BasicParameterNode& basic(NodeId id) const;
  const FunctionalNode& functional(NodeId id) const;
  const DataNode& data(NodeId id) const;

  const std::vector<NodeId>& basic_nodes() const { return basic_ids_; }
  const std::vector<NodeId>& functional_nodes() const { return functional_ids_; }
  const std::vector<NodeId>& derived_nodes() const { return derived_ids_; }
  const std::vector<NodeId>& data_nodes() const { return data_ids_; }
  const std::vector<SimplexBlock>& simplex_blocks() const { return blocks_; }
  const std::vector<VectorFunctionNode>& vector_functions() const { return vector_functions_; }
  /// Simplex block containing a simplex-component node.
  std::optional<std::size_t> block_of(NodeId id) const;
  /// Vector function producing a derived node, and the output position.
  std::pair<std::size_t, std::size_t> producer_of(NodeId id) const;

  /// Direct parents: expression references, vector-function inputs,
  /// hierarchical prior parents, and data targets.
  std::vector<NodeId> parents(NodeId id) const;

  /// Kahn topological sort over all nodes (basic, functional, derived, data).
  /// Throws GraphError if a cycle exists, which construction rules prevent.
  std::vector<NodeId> topological_order() const;

  /// Cached evaluation order of all functional and vector-function steps.
  const std::vector<EvalStep>& evaluation_order() const { return order_; }

  /// Free-parameter count: basic nodes minus one per simplex block.
  std::size_t free_parameter_count() const;

  /// Value nodes flagged for monitoring (basic and functional), in id order.
  std::vector<NodeId> monitored() const;

  /// Value assignment with basic nodes at their initial values and all
  /// functionals evaluated. Data slots hold NaN.
  std::vector<double> initial_values() const;

  /// Steps and terms affected by a change to `changed` basic nodes. With
  /// `observed_only`, steps that feed no data node are left out.
  LocalTerms local_terms(std::span<const NodeId> changed, bool observed_only = false) const;

  /// Copy with the observations of every data node replaced, in the order of
  /// data_nodes(). Throws GraphError if an observation does not fit its node.
  ParameterGraph with_observations(std::span<const DataItem> observations) const;

  /// Per node: true if some data node depends on it.
  std::vector<char> observed_ancestors() const;

 private:
  friend class GraphBuilder;

  std::vector<NodeKind> kinds_;
  std::vector<std::uint32_t> slot_;  // index into the per-kind storage
  std::vector<std::string> labels_;
  std::map<std::string, NodeId, std::less<>> by_label_;
  std::vector<BasicParameterNode> basics_;
  std::vector<FunctionalNode> functionals_;
  std::vector<DataNode> data_;
  std::vector<VectorFunctionNode> vector_functions_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> derived_;  // (vector function, output position)
  std::vector<SimplexBlock> blocks_;
  std::vector<std::optional<std::uint32_t>> block_of_;
  std::vector<NodeId> basic_ids_, functional_ids_, derived_ids_, data_ids_;
  std::vector<EvalStep> order_;
  std::vector<Declaration> declarations_;
};

class GraphBuilder {
 public:
  /// Adds a scalar basic parameter. Simplex components must go through
  /// add_simplex_block.
  NodeId add_basic(BasicParameterNode node);

  /// Adds a simplex block as `labels.size()` simplex-component nodes that
  /// share one Dirichlet(concentration) prior. `initial` defaults to the
  /// uniform point.
  std::vector<NodeId> add_simplex_block(std::string block_label, std::vector<std::string> labels,
                                        std::vector<double> concentration, std::string role = {},
                                        std::vector<double> initial = {});

  NodeId add_functional(FunctionalNode node);

  std::vector<NodeId> add_vector_function(std::string label, std::shared_ptr<const VectorFunction> fn,
                                          std::vector<NodeId> inputs, std::vector<std::string> output_labels,
                                          bool monitored = true);

  NodeId add_data(DataNode node);

  std::optional<NodeId> find(std::string_view label) const { return graph_.find(label); }
  NodeId at(std::string_view label) const { return graph_.at(label); }
  std::size_t size() const { return graph_.size(); }

  /// Computes the cached evaluation order and returns the immutable graph.
  ParameterGraph freeze() &&;

 private:
  NodeId insert(NodeKind kind, std::string label, std::uint32_t slot);
  void require_value_node(NodeId id, std::string_view context) const;

  ParameterGraph graph_;
};

using Values = std::vector<double>;

/// Evaluates every functional and derived node of `values` in topological
/// order, in place. Throws EvaluationError on out-of-support basic values or
/// a failing expression.
void evaluate_functionals(const ParameterGraph& graph, Values& values);

/// Returns a copy of `theta` with all functionals evaluated.
Values evaluated(const ParameterGraph& graph, const Values& theta);

/// Non-throwing evaluation of a subset of steps; returns the first error.
EvalError evaluate_steps(const ParameterGraph& graph, std::span<const EvalStep> steps, Values& values);

/// Throws EvaluationError if a basic value lies outside its support.
void check_support(const ParameterGraph& graph, const Values& values);

double prior_term(const ParameterGraph& graph, const PriorTerm& term, const Values& values);
double data_term(const ParameterGraph& graph, NodeId data, const Values& values);

/// All prior terms in a fixed order (scalar nodes by id, then simplex blocks).
std::vector<PriorTerm> all_prior_terms(const ParameterGraph& graph);

/// Sums over an evaluated value assignment.
double log_prior(const ParameterGraph& graph, const Values& values);
double log_likelihood(const ParameterGraph& graph, const Values& values);

/// log p(theta) + sum_i log L_i(psi_i(theta); y_i). Evaluates functionals
/// from the basic entries of theta; -inf for zero-likelihood states.
double log_joint(const ParameterGraph& graph, const Values& theta);

/// Sum of the local terms on an evaluated assignment.
double local_log_density(const ParameterGraph& graph, const LocalTerms& terms, const Values& values);

}  // namespace evsynth
