#include <cmath>

#include "evsynth/dynamics.hpp"
#include "evsynth/graph_io.hpp"

namespace evsynth {

const VectorFunctionRegistry& VectorFunctionRegistry::builtin() {
  static const VectorFunctionRegistry registry = [] {
    VectorFunctionRegistry r;
    r.add("ode-trajectory", [](std::span<const double> p) -> std::shared_ptr<const VectorFunction> {
      if (p.size() != 2 || !(p[0] >= 2.0) || p[0] != std::floor(p[0])) {
        throw ParseError("ode-trajectory expects parameters (years step)");
      }
      return std::make_shared<dynamics::TrajectoryFunction>(static_cast<std::size_t>(p[0]), p[1]);
    });
    return r;
  }();
  return registry;
}

}  // namespace evsynth
