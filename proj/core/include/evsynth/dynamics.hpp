#pragma once

// Four-compartment prevalence/incidence system for a single risk group:
//   e  not (yet) in the risk group
//   s  susceptible
//   u  infected, undiagnosed
//   d  infected, diagnosed
// with piecewise-constant rates on each interval [t, t+1):
//   de/dt = mu_in - (lambda_es + mu_out) e
//   ds/dt = lambda_es e - (lambda_su + mu_out) s
//   du/dt = lambda_su s - (lambda_ud + mu_out) u
//   dd/dt = lambda_ud u - mu_out d
// Diagnosis is absorbing. With mu_in = mu_out (e + s + u + d) the state stays
// on the proportion simplex.

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "evsynth/graph.hpp"

namespace evsynth::dynamics {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kDefaultStep = 0.01;
inline constexpr double kNegativeStateTolerance = 1e-9;

struct CompartmentState {
  double e = 0.0;
  double s = 0.0;
  double u = 0.0;
  double d = 0.0;

  double sum() const { return e + s + u + d; }
  std::array<double, 4> as_array() const { return {e, s, u, d}; }
  static CompartmentState from_array(std::span<const double> v);
  bool operator==(const CompartmentState&) const = default;
};

struct IntervalRates {
  double uptake = 0.0;     // lambda_es, per year
  double incidence = 0.0;  // lambda_su
  double diagnosis = 0.0;  // lambda_ud
  double entry = 0.0;      // mu_in
  double exit = 0.0;       // mu_out

  /// Rates with entry tied to exit so that a unit-sum state stays unit-sum.
  static IntervalRates balanced(double uptake, double incidence, double diagnosis, double exit);
};

using RateSchedule = std::vector<IntervalRates>;
using Derivative = std::array<double, 4>;

struct Trajectory {
  std::vector<CompartmentState> states;  // t = 1..T
  RateSchedule schedule;                 // intervals [t, t+1), t = 1..T-1
  double step = kDefaultStep;
};

Derivative ode_rhs(const CompartmentState& state, const IntervalRates& rates);

/// One classical fourth-order Runge-Kutta step. Throws SolverError if any
/// component ends below -1e-9 (step too large for the rates).
CompartmentState rk4_step(const CompartmentState& state, const IntervalRates& rates, double h);

/// Advances one unit interval using 1/h RK4 steps; h must divide 1.
CompartmentState integrate_interval(const CompartmentState& state, const IntervalRates& rates, double h);

Trajectory integrate_trajectory(const CompartmentState& initial, const RateSchedule& schedule,
                                double h = kDefaultStep);

/// Prevalence parameters of one year: rho = s+u+d, pi = (u+d)/rho,
/// delta = d/(u+d). `pi_defined` / `delta_defined` flag zero denominators
/// (the corresponding value is then NaN).
struct PrevalenceTheta {
  double rho = 0.0;
  double pi = 0.0;
  double delta = 0.0;
  bool pi_defined = true;
  bool delta_defined = true;
};

PrevalenceTheta state_to_theta(const CompartmentState& state);
/// Inverse map: e = 1-rho, s = rho(1-pi), u = rho pi (1-delta), d = rho pi delta.
CompartmentState theta_to_state(double rho, double pi, double delta);
std::vector<PrevalenceTheta> trajectory_to_theta(const Trajectory& trajectory);

enum class PrevalenceMeasure { rho, pi, delta, undiagnosed, diagnosed };
enum class RateQuantity { uptake, diagnosis, exit };

std::string_view measure_name(PrevalenceMeasure m);
PrevalenceMeasure parse_measure(std::string_view s);
std::string_view rate_quantity_name(RateQuantity q);
RateQuantity parse_rate_quantity(std::string_view s);

/// One prevalence datum y_t. Binomial(n, measure) for rho/pi/delta and
/// undiagnosed prevalence pi(1-delta); for `diagnosed`, x ~ Poisson(n * d_t)
/// where n is the population size.
struct PrevalenceDatum {
  std::size_t t = 1;  // 1-based year
  PrevalenceMeasure measure = PrevalenceMeasure::pi;
  std::uint64_t x = 0;
  std::uint64_t n = 0;
};

/// One rate datum z_t: x ~ Poisson(rate_t * exposure) for interval t.
struct RateDatum {
  std::size_t t = 1;  // 1-based interval index
  RateQuantity quantity = RateQuantity::diagnosis;
  std::uint64_t x = 0;
  double exposure = 1.0;
};

/// Value of a prevalence measure in one state (NaN where undefined).
double measure_value(const CompartmentState& state, PrevalenceMeasure measure);

/// log L(c1, lambda; y, z): integrates once, scores prevalence data at each
/// year's state and rate data against the schedule.
double joint_log_likelihood(const CompartmentState& c1, const RateSchedule& schedule,
                            std::span<const PrevalenceDatum> prevalence, std::span<const RateDatum> rates,
                            double h = kDefaultStep);

/// Graph adapter: inputs are c1 (e,s,u,d) followed by (uptake, incidence,
/// diagnosis, exit) for each of the T-1 intervals; outputs are (e,s,u,d) for
/// each of the T years. Entry is tied to exit.
class TrajectoryFunction final : public VectorFunction {
 public:
  TrajectoryFunction(std::size_t years, double step);

  std::string kind() const override { return "ode-trajectory"; }
  std::size_t input_size() const override { return 4 + 4 * (years_ - 1); }
  std::size_t output_size() const override { return 4 * years_; }
  std::vector<double> parameters() const override { return {static_cast<double>(years_), step_}; }
  EvalError evaluate(std::span<const double> inputs, std::span<double> outputs) const override;
  ValueRange output_range() const override { return ValueRange::probability; }

  std::size_t years() const { return years_; }
  double step() const { return step_; }

 private:
  std::size_t years_;
  double step_;
};

}  // namespace evsynth::dynamics
