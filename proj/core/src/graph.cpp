#include "evsynth/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <utility>

#include "evsynth/distributions.hpp"

namespace evsynth {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kSimplexTolerance = 1e-9;
constexpr double kRangeTolerance = 1e-9;

bool in_support(Support s, double v) {
  switch (s) {
    case Support::unit_interval:
    case Support::simplex_component:
      return v >= 0.0 && v <= 1.0;
    case Support::positive_real:
      return v >= 0.0 && std::isfinite(v);
    case Support::real:
      return std::isfinite(v);
  }
  return false;
}

ValueRange support_range(Support s) {
  switch (s) {
    case Support::unit_interval:
    case Support::simplex_component:
      return ValueRange::probability;
    case Support::positive_real:
      return ValueRange::non_negative;
    case Support::real:
      return ValueRange::real;
  }
  return ValueRange::real;
}

void dedupe(std::vector<NodeId>& ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
}

}  // namespace

std::string_view support_name(Support s) {
  switch (s) {
    case Support::unit_interval: return "unit-interval";
    case Support::positive_real: return "positive-real";
    case Support::real: return "real";
    case Support::simplex_component: return "simplex-component";
  }
  return "?";
}

std::string_view range_name(ValueRange r) {
  switch (r) {
    case ValueRange::probability: return "probability";
    case ValueRange::non_negative: return "non-negative";
    case ValueRange::real: return "real";
  }
  return "?";
}

std::string_view likelihood_name(Likelihood f) {
  switch (f) {
    case Likelihood::binomial: return "binomial";
    case Likelihood::poisson: return "poisson";
    case Likelihood::multinomial: return "multinomial";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// PriorSpec

PriorSpec PriorSpec::uniform(double a, double b) {
  PriorSpec p;
  p.family = Family::uniform;
  p.parameters = {a, b};
  return p;
}

PriorSpec PriorSpec::normal(double mean, double sd) {
  PriorSpec p;
  p.family = Family::normal;
  p.parameters = {mean, sd};
  return p;
}

PriorSpec PriorSpec::half_normal(double sd) {
  PriorSpec p;
  p.family = Family::half_normal;
  p.parameters = {sd};
  return p;
}

PriorSpec PriorSpec::hierarchical_normal(NodeId mean, NodeId sd) {
  PriorSpec p;
  p.family = Family::hierarchical_normal;
  p.parameters.clear();
  p.mean_parent = mean;
  p.sd_parent = sd;
  return p;
}

void PriorSpec::validate() const {
  switch (family) {
    case Family::uniform:
      if (parameters.size() != 2 || !(parameters[0] < parameters[1])) {
        throw GraphError("uniform prior requires a < b");
      }
      break;
    case Family::normal:
      if (parameters.size() != 2 || !(parameters[1] > 0.0)) throw GraphError("normal prior requires sd > 0");
      break;
    case Family::half_normal:
      if (parameters.size() != 1 || !(parameters[0] > 0.0)) {
        throw GraphError("half-normal prior requires sd > 0");
      }
      break;
    case Family::dirichlet:
      if (parameters.empty()) throw GraphError("dirichlet prior requires concentrations");
      for (double a : parameters) {
        if (!(a > 0.0)) throw GraphError("dirichlet concentrations must be positive");
      }
      break;
    case Family::hierarchical_normal:
      break;
  }
}

// ---------------------------------------------------------------------------
// ParameterGraph

const std::string& ParameterGraph::label(NodeId id) const { return labels_.at(id.index); }

std::optional<NodeId> ParameterGraph::find(std::string_view label) const {
  auto it = by_label_.find(label);
  if (it == by_label_.end()) return std::nullopt;
  return it->second;
}

NodeId ParameterGraph::at(std::string_view label) const {
  if (auto id = find(label)) return *id;
  throw GraphError("unknown node '" + std::string(label) + "'");
}

const BasicParameterNode& ParameterGraph::basic(NodeId id) const {
  if (kind(id) != NodeKind::basic) throw GraphError("node '" + label(id) + "' is not a basic parameter");
  return basics_[slot_[id.index]];
}

const FunctionalNode& ParameterGraph::functional(NodeId id) const {
  if (kind(id) != NodeKind::functional) throw GraphError("node '" + label(id) + "' is not a functional");
  return functionals_[slot_[id.index]];
}

const DataNode& ParameterGraph::data(NodeId id) const {
  if (kind(id) != NodeKind::data) throw GraphError("node '" + label(id) + "' is not a data node");
  return data_[slot_[id.index]];
}

std::optional<std::size_t> ParameterGraph::block_of(NodeId id) const {
  const auto& b = block_of_.at(id.index);
  if (!b) return std::nullopt;
  return *b;
}

std::pair<std::size_t, std::size_t> ParameterGraph::producer_of(NodeId id) const {
  if (kind(id) != NodeKind::derived) throw GraphError("node '" + label(id) + "' is not a derived output");
  return derived_[slot_[id.index]];
}

std::vector<NodeId> ParameterGraph::parents(NodeId id) const {
  std::vector<NodeId> out;
  switch (kind(id)) {
    case NodeKind::basic: {
      const auto& prior = basic(id).prior;
      if (prior.family == PriorSpec::Family::hierarchical_normal) {
        out.push_back(prior.mean_parent);
        out.push_back(prior.sd_parent);
      }
      break;
    }
    case NodeKind::functional:
      functional(id).expression.collect_refs(out);
      break;
    case NodeKind::derived:
      out = vector_functions_[producer_of(id).first].inputs;
      break;
    case NodeKind::data:
      out = data(id).targets;
      break;
  }
  dedupe(out);
  return out;
}

std::vector<NodeId> ParameterGraph::topological_order() const {
  const std::size_t n = size();
  std::vector<std::vector<NodeId>> children(n);
  std::vector<std::size_t> indegree(n, 0);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (NodeId p : parents(NodeId{i})) {
      children[p.index].push_back(NodeId{i});
      ++indegree[i];
    }
  }
  std::deque<NodeId> ready;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push_back(NodeId{i});
  }
  std::vector<NodeId> order;
  order.reserve(n);
  while (!ready.empty()) {
    NodeId v = ready.front();
    ready.pop_front();
    order.push_back(v);
    for (NodeId c : children[v.index]) {
      if (--indegree[c.index] == 0) ready.push_back(c);
    }
  }
  if (order.size() != n) throw GraphError("graph contains a cycle");
  return order;
}

std::size_t ParameterGraph::free_parameter_count() const { return basic_ids_.size() - blocks_.size(); }

std::vector<NodeId> ParameterGraph::monitored() const {
  std::vector<NodeId> out;
  for (std::uint32_t i = 0; i < size(); ++i) {
    const NodeId id{i};
    switch (kind(id)) {
      case NodeKind::basic:
        if (basic(id).monitored) out.push_back(id);
        break;
      case NodeKind::functional:
        if (functional(id).monitored) out.push_back(id);
        break;
      case NodeKind::derived:
        if (vector_functions_[producer_of(id).first].monitored) out.push_back(id);
        break;
      case NodeKind::data:
        break;
    }
  }
  return out;
}

Values ParameterGraph::initial_values() const {
  Values v(size(), kNaN);
  for (NodeId id : basic_ids_) v[id.index] = basic(id).initial;
  evaluate_steps(*this, order_, v);
  return v;
}

ParameterGraph ParameterGraph::with_observations(std::span<const DataItem> observations) const {
  if (observations.size() != data_.size()) throw GraphError("with_observations: one observation per data node required");
  ParameterGraph g = *this;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const DataItem& obs = observations[i];
    const DataNode& node = data_[i];
    const std::string where = "data node '" + node.label + "'";
    if (obs.family != node.observation.family) throw GraphError(where + ": likelihood family cannot change");
    if (obs.family == Likelihood::binomial && (obs.n < 1 || obs.x > obs.n)) {
      throw GraphError(where + ": binomial requires 0 <= x <= n, n >= 1");
    }
    if (obs.family == Likelihood::poisson && !(obs.offset > 0.0)) throw GraphError(where + ": poisson offset must be positive");
    if (obs.family == Likelihood::multinomial && obs.counts.size() != node.targets.size()) {
      throw GraphError(where + ": counts/targets length mismatch");
    }
    g.data_[i].observation = obs;
  }
  return g;
}

std::vector<char> ParameterGraph::observed_ancestors() const {
  std::vector<char> needed(size(), 0);
  for (NodeId d : data_ids_) {
    needed[d.index] = 1;
    for (NodeId t : data(d).targets) needed[t.index] = 1;
  }
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    std::vector<NodeId> refs;
    if (it->kind == EvalStep::Kind::functional) {
      if (!needed[it->index]) continue;
      functionals_[slot_[it->index]].expression.collect_refs(refs);
    } else {
      const auto& vf = vector_functions_[it->index];
      if (std::none_of(vf.outputs.begin(), vf.outputs.end(), [&](NodeId o) { return needed[o.index] != 0; })) {
        continue;
      }
      refs = vf.inputs;
    }
    for (NodeId r : refs) needed[r.index] = 1;
  }
  return needed;
}

LocalTerms ParameterGraph::local_terms(std::span<const NodeId> changed, bool observed_only) const {
  LocalTerms out;
  std::vector<char> needed;
  if (observed_only) needed = observed_ancestors();
  auto wanted = [&](const EvalStep& step) {
    if (!observed_only) return true;
    if (step.kind == EvalStep::Kind::functional) return needed[step.index] != 0;
    const auto& outs = vector_functions_[step.index].outputs;
    return std::any_of(outs.begin(), outs.end(), [&](NodeId o) { return needed[o.index] != 0; });
  };
  std::vector<char> dirty(size(), 0);
  for (NodeId id : changed) {
    if (kind(id) != NodeKind::basic) throw GraphError("local_terms: '" + label(id) + "' is not basic");
    dirty[id.index] = 1;
  }
  for (const EvalStep& step : order_) {
    if (step.kind == EvalStep::Kind::functional) {
      std::vector<NodeId> refs;
      functionals_[slot_[step.index]].expression.collect_refs(refs);
      if (std::any_of(refs.begin(), refs.end(), [&](NodeId r) { return dirty[r.index] != 0; })) {
        if (wanted(step)) out.steps.push_back(step);
        dirty[step.index] = 1;
      }
    } else {
      const auto& vf = vector_functions_[step.index];
      if (std::any_of(vf.inputs.begin(), vf.inputs.end(), [&](NodeId r) { return dirty[r.index] != 0; })) {
        if (wanted(step)) out.steps.push_back(step);
        for (NodeId o : vf.outputs) dirty[o.index] = 1;
      }
    }
  }
  std::vector<char> block_seen(blocks_.size(), 0);
  for (NodeId id : basic_ids_) {
    const auto& node = basic(id);
    if (auto b = block_of_[id.index]) {
      if (dirty[id.index] && !block_seen[*b]) {
        block_seen[*b] = 1;
        out.priors.push_back({PriorTerm::Kind::simplex, *b});
      }
      continue;
    }
    bool touched = dirty[id.index] != 0;
    if (node.prior.family == PriorSpec::Family::hierarchical_normal) {
      touched = touched || dirty[node.prior.mean_parent.index] || dirty[node.prior.sd_parent.index];
    }
    if (touched) out.priors.push_back({PriorTerm::Kind::scalar, id.index});
  }
  for (NodeId d : data_ids_) {
    const auto& targets = data(d).targets;
    if (std::any_of(targets.begin(), targets.end(), [&](NodeId t) { return dirty[t.index] != 0; })) {
      out.data.push_back(d);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// GraphBuilder

NodeId GraphBuilder::insert(NodeKind kind, std::string label, std::uint32_t slot) {
  if (label.empty()) throw GraphError("node label must not be empty");
  if (graph_.by_label_.contains(label)) throw GraphError("duplicate id '" + label + "'");
  const NodeId id{static_cast<std::uint32_t>(graph_.kinds_.size())};
  graph_.kinds_.push_back(kind);
  graph_.slot_.push_back(slot);
  graph_.labels_.push_back(label);
  graph_.by_label_.emplace(std::move(label), id);
  graph_.block_of_.emplace_back();
  switch (kind) {
    case NodeKind::basic: graph_.basic_ids_.push_back(id); break;
    case NodeKind::functional: graph_.functional_ids_.push_back(id); break;
    case NodeKind::derived: graph_.derived_ids_.push_back(id); break;
    case NodeKind::data: graph_.data_ids_.push_back(id); break;
  }
  return id;
}

void GraphBuilder::require_value_node(NodeId id, std::string_view context) const {
  if (id.index >= graph_.size()) {
    throw GraphError("unknown parent (node #" + std::to_string(id.index) + ") referenced by '" +
                     std::string(context) + "'");
  }
  if (graph_.kind(id) == NodeKind::data) {
    throw GraphError("'" + std::string(context) + "' references data node '" + graph_.label(id) + "'");
  }
}

NodeId GraphBuilder::add_basic(BasicParameterNode node) {
  if (node.support == Support::simplex_component) {
    throw GraphError("simplex components must be added with add_simplex_block");
  }
  if (node.prior.family == PriorSpec::Family::dirichlet) {
    throw GraphError("dirichlet priors apply to simplex blocks only");
  }
  node.prior.validate();
  if (node.prior.family == PriorSpec::Family::hierarchical_normal) {
    require_value_node(node.prior.mean_parent, node.label);
    require_value_node(node.prior.sd_parent, node.label);
    // At most two hierarchy levels: the mean parent may itself be
    // hierarchical only if its own parent is not.
    const NodeId mean = node.prior.mean_parent;
    if (graph_.kind(mean) == NodeKind::basic) {
      const auto& mp = graph_.basic(mean).prior;
      if (mp.family == PriorSpec::Family::hierarchical_normal &&
          graph_.kind(mp.mean_parent) == NodeKind::basic &&
          graph_.basic(mp.mean_parent).prior.family == PriorSpec::Family::hierarchical_normal) {
        throw GraphError("'" + node.label + "': hierarchical priors support at most two levels");
      }
    }
  }
  if (!in_support(node.support, node.initial)) {
    throw GraphError("'" + node.label + "': initial value outside support");
  }
  const auto slot = static_cast<std::uint32_t>(graph_.basics_.size());
  const NodeId id = insert(NodeKind::basic, node.label, slot);
  graph_.basics_.push_back(std::move(node));
  graph_.declarations_.push_back({ParameterGraph::Declaration::Kind::basic, id.index});
  return id;
}

std::vector<NodeId> GraphBuilder::add_simplex_block(std::string block_label, std::vector<std::string> labels,
                                                    std::vector<double> concentration, std::string role,
                                                    std::vector<double> initial) {
  const std::size_t k = labels.size();
  if (k < 2) throw GraphError("simplex block '" + block_label + "' needs at least two components");
  if (concentration.size() != k) throw GraphError("simplex block '" + block_label + "': concentration size");
  PriorSpec prior;
  prior.family = PriorSpec::Family::dirichlet;
  prior.parameters = concentration;
  prior.validate();
  if (initial.empty()) initial.assign(k, 1.0 / static_cast<double>(k));
  if (initial.size() != k) throw GraphError("simplex block '" + block_label + "': initial size");
  const double total = std::accumulate(initial.begin(), initial.end(), 0.0);
  if (std::abs(total - 1.0) > kSimplexTolerance ||
      std::any_of(initial.begin(), initial.end(), [](double v) { return v < 0.0; })) {
    throw GraphError("simplex block '" + block_label + "': initial values off the simplex");
  }
  for (const auto& b : graph_.blocks_) {
    if (b.label == block_label) throw GraphError("duplicate id '" + block_label + "'");
  }

  const auto block_index = static_cast<std::uint32_t>(graph_.blocks_.size());
  SimplexBlock block{block_label, {}, concentration, role};
  for (std::size_t i = 0; i < k; ++i) {
    BasicParameterNode node;
    node.label = labels[i];
    node.support = Support::simplex_component;
    node.prior = prior;
    node.prior.parameters = {concentration[i]};
    node.initial = initial[i];
    node.role = role;
    const auto slot = static_cast<std::uint32_t>(graph_.basics_.size());
    const NodeId id = insert(NodeKind::basic, node.label, slot);
    graph_.basics_.push_back(std::move(node));
    graph_.block_of_[id.index] = block_index;
    block.members.push_back(id);
  }
  auto members = block.members;
  graph_.blocks_.push_back(std::move(block));
  graph_.declarations_.push_back({ParameterGraph::Declaration::Kind::simplex, block_index});
  return members;
}

NodeId GraphBuilder::add_functional(FunctionalNode node) {
  std::vector<NodeId> refs;
  node.expression.collect_refs(refs);
  for (NodeId r : refs) require_value_node(r, node.label);
  const auto slot = static_cast<std::uint32_t>(graph_.functionals_.size());
  const NodeId id = insert(NodeKind::functional, node.label, slot);
  graph_.functionals_.push_back(std::move(node));
  graph_.declarations_.push_back({ParameterGraph::Declaration::Kind::functional, id.index});
  graph_.order_.push_back({EvalStep::Kind::functional, id.index});
  return id;
}

std::vector<NodeId> GraphBuilder::add_vector_function(std::string label, std::shared_ptr<const VectorFunction> fn,
                                                      std::vector<NodeId> inputs,
                                                      std::vector<std::string> output_labels, bool monitored) {
  if (!fn) throw GraphError("vector function '" + label + "' is null");
  if (inputs.size() != fn->input_size()) throw GraphError("vector function '" + label + "': input count");
  if (output_labels.size() != fn->output_size()) throw GraphError("vector function '" + label + "': output count");
  for (NodeId in : inputs) require_value_node(in, label);
  for (const auto& vf : graph_.vector_functions_) {
    if (vf.label == label) throw GraphError("duplicate id '" + label + "'");
  }
  const auto vf_index = static_cast<std::uint32_t>(graph_.vector_functions_.size());
  VectorFunctionNode node{std::move(label), std::move(fn), std::move(inputs), {}, monitored};
  for (std::size_t i = 0; i < output_labels.size(); ++i) {
    const auto slot = static_cast<std::uint32_t>(graph_.derived_.size());
    const NodeId id = insert(NodeKind::derived, output_labels[i], slot);
    graph_.derived_.emplace_back(vf_index, static_cast<std::uint32_t>(i));
    node.outputs.push_back(id);
  }
  auto outputs = node.outputs;
  graph_.vector_functions_.push_back(std::move(node));
  graph_.declarations_.push_back({ParameterGraph::Declaration::Kind::vector_function, vf_index});
  graph_.order_.push_back({EvalStep::Kind::vector_function, vf_index});
  return outputs;
}

NodeId GraphBuilder::add_data(DataNode node) {
  if (node.targets.empty()) throw GraphError("data node '" + node.label + "' has no target");
  auto range_of = [&](NodeId t) {
    switch (graph_.kind(t)) {
      case NodeKind::basic: return support_range(graph_.basic(t).support);
      case NodeKind::functional: return graph_.functional(t).range;
      case NodeKind::derived:
        return graph_.vector_functions_[graph_.producer_of(t).first].function->output_range();
      case NodeKind::data: break;
    }
    return ValueRange::real;
  };
  for (NodeId t : node.targets) require_value_node(t, node.label);
  const auto& obs = node.observation;
  const std::string where = "data node '" + node.label + "'";
  switch (obs.family) {
    case Likelihood::binomial:
      if (node.targets.size() != 1) throw GraphError(where + ": binomial takes one target");
      if (range_of(node.targets[0]) != ValueRange::probability) {
        throw GraphError(where + ": binomial target must be a probability");
      }
      if (obs.n < 1 || obs.x > obs.n) throw GraphError(where + ": binomial requires 0 <= x <= n, n >= 1");
      break;
    case Likelihood::poisson:
      if (node.targets.size() != 1) throw GraphError(where + ": poisson takes one target");
      if (range_of(node.targets[0]) == ValueRange::real) {
        throw GraphError(where + ": poisson target must be non-negative");
      }
      if (!(obs.offset > 0.0)) throw GraphError(where + ": poisson offset must be positive");
      break;
    case Likelihood::multinomial:
      if (node.targets.size() < 2) throw GraphError(where + ": multinomial needs at least two categories");
      if (obs.counts.size() != node.targets.size()) throw GraphError(where + ": counts/targets length mismatch");
      for (NodeId t : node.targets) {
        if (range_of(t) != ValueRange::probability) throw GraphError(where + ": multinomial targets must be probabilities");
      }
      break;
  }
  if (node.total_from) {
    if (obs.family != Likelihood::multinomial) throw GraphError(where + ": total_from applies to multinomial only");
    if (node.total_from->index >= graph_.size() || graph_.kind(*node.total_from) != NodeKind::data ||
        graph_.data(*node.total_from).observation.family != Likelihood::poisson) {
      throw GraphError(where + ": total_from must name an existing poisson data node");
    }
  }
  const auto slot = static_cast<std::uint32_t>(graph_.data_.size());
  const NodeId id = insert(NodeKind::data, node.label, slot);
  graph_.data_.push_back(std::move(node));
  graph_.declarations_.push_back({ParameterGraph::Declaration::Kind::data, id.index});
  return id;
}

ParameterGraph GraphBuilder::freeze() && {
  graph_.topological_order();  // validates acyclicity
  return std::move(graph_);
}

// ---------------------------------------------------------------------------
// Evaluation

EvalError evaluate_steps(const ParameterGraph& graph, std::span<const EvalStep> steps, Values& values) {
  std::vector<double> in;
  std::vector<double> out;
  for (const EvalStep& step : steps) {
    if (step.kind == EvalStep::Kind::functional) {
      EvalError err = EvalError::none;
      const double v = graph.functional(NodeId{step.index}).expression.evaluate(values, err);
      if (err != EvalError::none) return err;
      if (!std::isfinite(v)) return EvalError::non_finite;
      values[step.index] = v;
    } else {
      const auto& vf = graph.vector_functions()[step.index];
      in.resize(vf.inputs.size());
      out.resize(vf.outputs.size());
      for (std::size_t i = 0; i < in.size(); ++i) in[i] = values[vf.inputs[i].index];
      if (EvalError err = vf.function->evaluate(in, out); err != EvalError::none) return err;
      for (std::size_t i = 0; i < out.size(); ++i) values[vf.outputs[i].index] = out[i];
    }
  }
  return EvalError::none;
}

void check_support(const ParameterGraph& graph, const Values& values) {
  if (values.size() != graph.size()) throw EvaluationError("value assignment has wrong size");
  for (NodeId id : graph.basic_nodes()) {
    const auto& node = graph.basic(id);
    if (!in_support(node.support, values[id.index])) {
      throw EvaluationError("out-of-support input for '" + node.label + "'");
    }
  }
  for (const auto& block : graph.simplex_blocks()) {
    double total = 0.0;
    for (NodeId m : block.members) total += values[m.index];
    if (std::abs(total - 1.0) > kSimplexTolerance) {
      throw EvaluationError("out-of-support input: simplex block '" + block.label + "' does not sum to 1");
    }
  }
}

void evaluate_functionals(const ParameterGraph& graph, Values& values) {
  check_support(graph, values);
  std::vector<double> in;
  std::vector<double> out;
  for (const EvalStep& step : graph.evaluation_order()) {
    const EvalError err = evaluate_steps(graph, std::span<const EvalStep>(&step, 1), values);
    if (err != EvalError::none) {
      const std::string name = step.kind == EvalStep::Kind::functional
                                   ? graph.label(NodeId{step.index})
                                   : graph.vector_functions()[step.index].label;
      throw EvaluationError("evaluating '" + name + "': " + std::string(eval_error_message(err)));
    }
  }
}

Values evaluated(const ParameterGraph& graph, const Values& theta) {
  Values v = theta;
  evaluate_functionals(graph, v);
  return v;
}

double prior_term(const ParameterGraph& graph, const PriorTerm& term, const Values& values) {
  if (term.kind == PriorTerm::Kind::simplex) {
    const auto& block = graph.simplex_blocks()[term.index];
    std::vector<double> p(block.members.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = values[block.members[i].index];
    return dist::dirichlet_log_pdf(p, block.concentration);
  }
  const NodeId id{term.index};
  const auto& prior = graph.basic(id).prior;
  const double x = values[id.index];
  const auto& a = prior.parameters;
  switch (prior.family) {
    case PriorSpec::Family::uniform:
      return dist::uniform_log_pdf(x, a[0], a[1]);
    case PriorSpec::Family::normal:
      return dist::normal_log_pdf(x, a[0], a[1]);
    case PriorSpec::Family::half_normal:
      return dist::half_normal_log_pdf(x, a[0]);
    case PriorSpec::Family::hierarchical_normal: {
      const double sd = values[prior.sd_parent.index];
      if (!(sd > 0.0)) return dist::kNegInf;
      return dist::normal_log_pdf(x, values[prior.mean_parent.index], sd);
    }
    case PriorSpec::Family::dirichlet:
      break;
  }
  throw EvaluationError("scalar prior term on a simplex component");
}

double data_term(const ParameterGraph& graph, NodeId data, const Values& values) {
  const auto& node = graph.data(data);
  const auto& obs = node.observation;
  switch (obs.family) {
    case Likelihood::binomial: {
      double p = values[node.targets[0].index];
      if (p < -kRangeTolerance || p > 1.0 + kRangeTolerance || std::isnan(p)) return dist::kNegInf;
      p = std::clamp(p, 0.0, 1.0);
      return dist::binomial_log_pmf(obs.x, obs.n, p);
    }
    case Likelihood::poisson: {
      const double mu = values[node.targets[0].index] * obs.offset;
      if (!(mu >= 0.0)) return dist::kNegInf;
      return dist::poisson_log_pmf(obs.x, mu);
    }
    case Likelihood::multinomial: {
      std::vector<double> p(node.targets.size());
      double total = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = values[node.targets[i].index];
        if (p[i] < -kRangeTolerance || std::isnan(p[i])) return dist::kNegInf;
        p[i] = std::max(p[i], 0.0);
        total += p[i];
      }
      if (std::abs(total - 1.0) > kRangeTolerance) {
        throw EvaluationError("multinomial targets of '" + node.label + "' do not sum to 1");
      }
      for (double& v : p) v /= total;
      return dist::multinomial_log_pmf(obs.counts, p);
    }
  }
  return dist::kNegInf;
}

std::vector<PriorTerm> all_prior_terms(const ParameterGraph& graph) {
  std::vector<PriorTerm> terms;
  for (NodeId id : graph.basic_nodes()) {
    if (!graph.block_of(id)) terms.push_back({PriorTerm::Kind::scalar, id.index});
  }
  for (std::uint32_t b = 0; b < graph.simplex_blocks().size(); ++b) {
    terms.push_back({PriorTerm::Kind::simplex, b});
  }
  return terms;
}

double log_prior(const ParameterGraph& graph, const Values& values) {
  double total = 0.0;
  for (const auto& t : all_prior_terms(graph)) total += prior_term(graph, t, values);
  return total;
}

double log_likelihood(const ParameterGraph& graph, const Values& values) {
  double total = 0.0;
  for (NodeId d : graph.data_nodes()) {
    total += data_term(graph, d, values);
    if (total == dist::kNegInf) return total;
  }
  return total;
}

double log_joint(const ParameterGraph& graph, const Values& theta) {
  const Values v = evaluated(graph, theta);
  const double lp = log_prior(graph, v);
  if (lp == dist::kNegInf) return lp;
  return lp + log_likelihood(graph, v);
}

double local_log_density(const ParameterGraph& graph, const LocalTerms& terms, const Values& values) {
  double total = 0.0;
  for (const auto& t : terms.priors) {
    total += prior_term(graph, t, values);
    if (total == dist::kNegInf) return total;
  }
  for (NodeId d : terms.data) {
    total += data_term(graph, d, values);
    if (total == dist::kNegInf) return total;
  }
  return total;
}

}  // namespace evsynth
