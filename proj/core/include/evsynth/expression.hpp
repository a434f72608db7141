#pragma once

// Closed algebra of functional-parameter expressions. An expression is a
// small tree over node references and constants; evaluation reads node
// values from a dense value-assignment indexed by NodeId.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace evsynth {

struct NodeId {
  std::uint32_t index = 0;
  auto operator<=>(const NodeId&) const = default;
};

enum class Op {
  constant,
  ref,
  add,
  subtract,
  multiply,
  divide,
  logit,
  expit,
  log,
  exp,
  // sum_i w_i * share_i * value_i / sum_i w_i * share_i; args alternate
  // (share_0, value_0, share_1, value_1, ...).
  weighted_mixture,
  // args[share_index] / sum(args).
  normalized_share,
};

std::string_view op_name(Op op);

enum class EvalError { none, division_by_zero, domain, non_finite };

std::string_view eval_error_message(EvalError e);

class Expr {
 public:
  Op op = Op::constant;
  double value = 0.0;
  NodeId node{};
  std::size_t share_index = 0;
  std::vector<double> weights;
  std::vector<Expr> args;

  /// Evaluates against `values`. On failure returns NaN and sets `error`.
  double evaluate(std::span<const double> values, EvalError& error) const;

  /// Appends every referenced node (with repetition) to `out`.
  void collect_refs(std::vector<NodeId>& out) const;

  bool operator==(const Expr&) const = default;
};

Expr constant(double v);
Expr ref(NodeId id);
Expr sum(std::vector<Expr> terms);
Expr product(std::vector<Expr> factors);
Expr logit(Expr x);
Expr expit(Expr x);
Expr log(Expr x);
Expr exp(Expr x);
Expr weighted_mixture(std::vector<double> weights, std::vector<Expr> shares, std::vector<Expr> values);
Expr normalized_share(std::size_t index, std::vector<Expr> terms);

Expr operator+(Expr a, Expr b);
Expr operator-(Expr a, Expr b);
Expr operator*(Expr a, Expr b);
Expr operator/(Expr a, Expr b);

}  // namespace evsynth
