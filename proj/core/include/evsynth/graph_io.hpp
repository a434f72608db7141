#pragma once

// Text serialization of a frozen ParameterGraph as a nested s-expression
// document. Expressions are written in prefix notation and numbers in
// shortest round-trip form, so parse(serialize(g)) reproduces g exactly.
//
//   (graph
//     (basic "pi" (support unit-interval) (prior (uniform 0 1)) (initial 0.5) (role "pi") (monitor 1))
//     (simplex "rho" (role "rho") (members ("rho.a" 1 0.5) ("rho.b" 1 0.5)))
//     (functional "u" (range probability) (role "") (monitor 0)
//       (expr (mul (ref "pi") (sub 1 (ref "delta")))))
//     (vector-function "traj" (kind "ode-trajectory") (parameters 8 0.01)
//       (inputs "c.e" ...) (outputs "e.1" ...) (monitor 1))
//     (data "y" (targets "pi") (binomial 5 10) (source "survey")))

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "evsynth/graph.hpp"

namespace evsynth {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Maps a vector-function kind to a factory taking its serialized parameters.
class VectorFunctionRegistry {
 public:
  using Factory = std::function<std::shared_ptr<const VectorFunction>(std::span<const double>)>;

  void add(std::string kind, Factory factory);
  std::shared_ptr<const VectorFunction> make(std::string_view kind, std::span<const double> parameters) const;

  /// Registry with every vector function shipped in this library.
  static const VectorFunctionRegistry& builtin();

 private:
  std::map<std::string, Factory, std::less<>> factories_;
};

std::string serialize_graph(const ParameterGraph& graph);

ParameterGraph parse_graph(std::string_view text,
                           const VectorFunctionRegistry& registry = VectorFunctionRegistry::builtin());

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

}  // namespace evsynth
