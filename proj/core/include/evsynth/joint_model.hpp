#pragma once

// Joint prevalence/incidence model as a parameter graph: the initial state c1
// (Dirichlet simplex over e,s,u,d) and per-interval rates are the basic
// parameters; one ode-trajectory node produces the yearly states, and the
// yearly prevalence parameters are functionals of those states.

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "evsynth/dynamics.hpp"
#include "evsynth/graph.hpp"

namespace evsynth::dynamics {

struct JointSettings {
  std::size_t years = 8;
  double step = kDefaultStep;
  // uniform(0, max) priors per rate kind.
  double uptake_max = 1.0;
  double incidence_max = 0.5;
  double diagnosis_max = 3.0;
  double exit_max = 0.5;
  std::array<double, 4> c1_concentration{1.0, 1.0, 1.0, 1.0};
};

/// Reads a [dynamics] section: years, step, uptake_max, incidence_max,
/// diagnosis_max, exit_max, c1_concentration (four numbers). Unknown keys
/// other than file references (prevalence_file, rate_file) are rejected.
JointSettings parse_joint_settings(const std::map<std::string, std::string, std::less<>>& section);

enum class RateKind : std::size_t { uptake = 0, incidence = 1, diagnosis = 2, exit = 3 };
std::string_view rate_label(RateKind k);

struct JointModel {
  ParameterGraph graph;
  JointSettings settings;
  std::array<NodeId, 4> c1{};
  std::vector<std::array<NodeId, 4>> rates;   // per interval, indexed by RateKind
  std::vector<std::array<NodeId, 4>> states;  // per year: e, s, u, d
  std::vector<NodeId> prevalence_data;
  std::vector<NodeId> rate_data;

  NodeId rate(RateKind kind, std::size_t interval) const {
    return rates.at(interval - 1)[static_cast<std::size_t>(kind)];
  }
};

/// Throws std::invalid_argument("joint model requires T >= 2") for T < 2 and
/// std::out_of_range for data outside the horizon.
JointModel build_joint_graph(const JointSettings& settings, std::span<const PrevalenceDatum> prevalence,
                             std::span<const RateDatum> rates);

/// CSV `t,measure,x,n` (measure: rho, pi, delta, undiagnosed, diagnosed).
std::vector<PrevalenceDatum> parse_prevalence_csv(std::string_view text);
std::string format_prevalence_csv(std::span<const PrevalenceDatum> data);
/// CSV `t,quantity,x,exposure`.
std::vector<RateDatum> parse_rate_csv(std::string_view text);
std::string format_rate_csv(std::span<const RateDatum> data);
/// CSV `t,e,s,u,d`.
std::string format_trajectory_csv(std::span<const CompartmentState> states);

}  // namespace evsynth::dynamics
