#include "evsynth/expression.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "evsynth/distributions.hpp"

namespace evsynth {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Expr make(Op op, std::vector<Expr> args) {
  Expr e;
  e.op = op;
  e.args = std::move(args);
  return e;
}

// Flattens nested n-ary nodes of the same op so that a + b + c is one node.
Expr fold(Op op, Expr a, Expr b) {
  std::vector<Expr> args;
  for (Expr* side : {&a, &b}) {
    if (side->op == op) {
      for (auto& child : side->args) args.push_back(std::move(child));
    } else {
      args.push_back(std::move(*side));
    }
  }
  return make(op, std::move(args));
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::constant: return "const";
    case Op::ref: return "ref";
    case Op::add: return "add";
    case Op::subtract: return "sub";
    case Op::multiply: return "mul";
    case Op::divide: return "div";
    case Op::logit: return "logit";
    case Op::expit: return "expit";
    case Op::log: return "log";
    case Op::exp: return "exp";
    case Op::weighted_mixture: return "mixture";
    case Op::normalized_share: return "share";
  }
  return "?";
}

std::string_view eval_error_message(EvalError e) {
  switch (e) {
    case EvalError::none: return "ok";
    case EvalError::division_by_zero: return "division by zero";
    case EvalError::domain: return "argument outside function domain";
    case EvalError::non_finite: return "non-finite result";
  }
  return "?";
}

double Expr::evaluate(std::span<const double> values, EvalError& error) const {
  if (error != EvalError::none) return kNaN;
  switch (op) {
    case Op::constant:
      return value;
    case Op::ref:
      return values[node.index];
    case Op::add: {
      double acc = 0.0;
      for (const auto& a : args) acc += a.evaluate(values, error);
      return acc;
    }
    case Op::subtract:
      return args[0].evaluate(values, error) - args[1].evaluate(values, error);
    case Op::multiply: {
      double acc = 1.0;
      for (const auto& a : args) acc *= a.evaluate(values, error);
      return acc;
    }
    case Op::divide: {
      const double num = args[0].evaluate(values, error);
      const double den = args[1].evaluate(values, error);
      if (den == 0.0) {
        error = EvalError::division_by_zero;
        return kNaN;
      }
      return num / den;
    }
    case Op::logit: {
      const double p = args[0].evaluate(values, error);
      if (!(p >= 0.0 && p <= 1.0)) {
        error = EvalError::domain;
        return kNaN;
      }
      return dist::logit(p);
    }
    case Op::expit:
      return dist::expit(args[0].evaluate(values, error));
    case Op::log: {
      const double x = args[0].evaluate(values, error);
      if (!(x > 0.0)) {
        error = EvalError::domain;
        return kNaN;
      }
      return std::log(x);
    }
    case Op::exp:
      return std::exp(args[0].evaluate(values, error));
    case Op::weighted_mixture: {
      double num = 0.0;
      double den = 0.0;
      for (std::size_t i = 0; i < weights.size(); ++i) {
        const double share = args[2 * i].evaluate(values, error);
        const double v = args[2 * i + 1].evaluate(values, error);
        num += weights[i] * share * v;
        den += weights[i] * share;
      }
      if (den == 0.0) {
        error = EvalError::division_by_zero;
        return kNaN;
      }
      return num / den;
    }
    case Op::normalized_share: {
      double total = 0.0;
      double mine = 0.0;
      for (std::size_t i = 0; i < args.size(); ++i) {
        const double t = args[i].evaluate(values, error);
        total += t;
        if (i == share_index) mine = t;
      }
      if (total == 0.0) {
        error = EvalError::division_by_zero;
        return kNaN;
      }
      return mine / total;
    }
  }
  error = EvalError::domain;
  return kNaN;
}

void Expr::collect_refs(std::vector<NodeId>& out) const {
  if (op == Op::ref) out.push_back(node);
  for (const auto& a : args) a.collect_refs(out);
}

Expr constant(double v) {
  Expr e;
  e.op = Op::constant;
  e.value = v;
  return e;
}

Expr ref(NodeId id) {
  Expr e;
  e.op = Op::ref;
  e.node = id;
  return e;
}

Expr sum(std::vector<Expr> terms) {
  if (terms.empty()) return constant(0.0);
  if (terms.size() == 1) return std::move(terms.front());
  return make(Op::add, std::move(terms));
}

Expr product(std::vector<Expr> factors) {
  if (factors.empty()) return constant(1.0);
  if (factors.size() == 1) return std::move(factors.front());
  return make(Op::multiply, std::move(factors));
}

Expr logit(Expr x) { return make(Op::logit, {std::move(x)}); }
Expr expit(Expr x) { return make(Op::expit, {std::move(x)}); }
Expr log(Expr x) { return make(Op::log, {std::move(x)}); }
Expr exp(Expr x) { return make(Op::exp, {std::move(x)}); }

Expr weighted_mixture(std::vector<double> weights, std::vector<Expr> shares, std::vector<Expr> values) {
  if (weights.empty() || weights.size() != shares.size() || weights.size() != values.size()) {
    throw std::invalid_argument("weighted_mixture: weights, shares and values must align and be non-empty");
  }
  for (double w : weights) {
    if (!(w > 0.0)) throw std::invalid_argument("weighted_mixture: weights must be positive");
  }
  std::vector<Expr> args;
  args.reserve(2 * shares.size());
  for (std::size_t i = 0; i < shares.size(); ++i) {
    args.push_back(std::move(shares[i]));
    args.push_back(std::move(values[i]));
  }
  Expr e = make(Op::weighted_mixture, std::move(args));
  e.weights = std::move(weights);
  return e;
}

Expr normalized_share(std::size_t index, std::vector<Expr> terms) {
  if (index >= terms.size()) throw std::invalid_argument("normalized_share: index out of range");
  Expr e = make(Op::normalized_share, std::move(terms));
  e.share_index = index;
  return e;
}

Expr operator+(Expr a, Expr b) { return fold(Op::add, std::move(a), std::move(b)); }
Expr operator-(Expr a, Expr b) { return make(Op::subtract, {std::move(a), std::move(b)}); }
Expr operator*(Expr a, Expr b) { return fold(Op::multiply, std::move(a), std::move(b)); }
Expr operator/(Expr a, Expr b) { return make(Op::divide, {std::move(a), std::move(b)}); }

}  // namespace evsynth
