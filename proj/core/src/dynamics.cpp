#include "evsynth/dynamics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "evsynth/distributions.hpp"

namespace evsynth::dynamics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

CompartmentState axpy(const CompartmentState& x, double a, const Derivative& k) {
  return {x.e + a * k[0], x.s + a * k[1], x.u + a * k[2], x.d + a * k[3]};
}

std::size_t steps_per_interval(double h) {
  if (!(h > 0.0) || h > 1.0) throw SolverError("step size must lie in (0, 1]");
  const double n = 1.0 / h;
  const double rounded = std::round(n);
  if (std::abs(n - rounded) > 1e-9 * rounded) throw SolverError("step size must divide the unit interval");
  return static_cast<std::size_t>(rounded);
}

void check_rates(const IntervalRates& r) {
  if (!(r.uptake >= 0.0 && r.incidence >= 0.0 && r.diagnosis >= 0.0 && r.entry >= 0.0 && r.exit >= 0.0)) {
    throw SolverError("transition rates must be non-negative");
  }
}

}  // namespace

CompartmentState CompartmentState::from_array(std::span<const double> v) {
  if (v.size() != 4) throw std::invalid_argument("compartment state needs four components");
  return {v[0], v[1], v[2], v[3]};
}

IntervalRates IntervalRates::balanced(double uptake, double incidence, double diagnosis, double exit) {
  return {uptake, incidence, diagnosis, exit, exit};
}

Derivative ode_rhs(const CompartmentState& c, const IntervalRates& r) {
  return {
      r.entry - (r.uptake + r.exit) * c.e,
      r.uptake * c.e - (r.incidence + r.exit) * c.s,
      r.incidence * c.s - (r.diagnosis + r.exit) * c.u,
      r.diagnosis * c.u - r.exit * c.d,
  };
}

CompartmentState rk4_step(const CompartmentState& x, const IntervalRates& r, double h) {
  if (!(h > 0.0)) throw SolverError("step size must be positive");
  const Derivative k1 = ode_rhs(x, r);
  const Derivative k2 = ode_rhs(axpy(x, 0.5 * h, k1), r);
  const Derivative k3 = ode_rhs(axpy(x, 0.5 * h, k2), r);
  const Derivative k4 = ode_rhs(axpy(x, h, k3), r);
  const double w = h / 6.0;
  CompartmentState next{
      x.e + w * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
      x.s + w * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
      x.u + w * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
      x.d + w * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
  };
  for (double v : next.as_array()) {
    if (!(v >= -kNegativeStateTolerance)) {
      throw SolverError("compartment driven negative; reduce the step size");
    }
  }
  return next;
}

CompartmentState integrate_interval(const CompartmentState& state, const IntervalRates& rates, double h) {
  check_rates(rates);
  const std::size_t n = steps_per_interval(h);
  const double step = 1.0 / static_cast<double>(n);
  CompartmentState x = state;
  for (std::size_t i = 0; i < n; ++i) x = rk4_step(x, rates, step);
  return x;
}

Trajectory integrate_trajectory(const CompartmentState& initial, const RateSchedule& schedule, double h) {
  Trajectory traj;
  traj.schedule = schedule;
  traj.step = h;
  traj.states.reserve(schedule.size() + 1);
  traj.states.push_back(initial);
  for (const auto& rates : schedule) traj.states.push_back(integrate_interval(traj.states.back(), rates, h));
  return traj;
}

PrevalenceTheta state_to_theta(const CompartmentState& c) {
  PrevalenceTheta th;
  th.rho = c.s + c.u + c.d;
  const double infected = c.u + c.d;
  if (th.rho > 0.0) {
    th.pi = infected / th.rho;
  } else {
    th.pi = kNaN;
    th.pi_defined = false;
  }
  if (infected > 0.0) {
    th.delta = c.d / infected;
  } else {
    th.delta = kNaN;
    th.delta_defined = false;
  }
  return th;
}

CompartmentState theta_to_state(double rho, double pi, double delta) {
  return {1.0 - rho, rho * (1.0 - pi), rho * pi * (1.0 - delta), rho * pi * delta};
}

std::vector<PrevalenceTheta> trajectory_to_theta(const Trajectory& trajectory) {
  std::vector<PrevalenceTheta> out;
  out.reserve(trajectory.states.size());
  for (const auto& s : trajectory.states) out.push_back(state_to_theta(s));
  return out;
}

std::string_view measure_name(PrevalenceMeasure m) {
  switch (m) {
    case PrevalenceMeasure::rho: return "rho";
    case PrevalenceMeasure::pi: return "pi";
    case PrevalenceMeasure::delta: return "delta";
    case PrevalenceMeasure::undiagnosed: return "undiagnosed";
    case PrevalenceMeasure::diagnosed: return "diagnosed";
  }
  return "?";
}

PrevalenceMeasure parse_measure(std::string_view s) {
  for (auto m : {PrevalenceMeasure::rho, PrevalenceMeasure::pi, PrevalenceMeasure::delta,
                 PrevalenceMeasure::undiagnosed, PrevalenceMeasure::diagnosed}) {
    if (measure_name(m) == s) return m;
  }
  throw std::invalid_argument("unknown prevalence measure '" + std::string(s) + "'");
}

std::string_view rate_quantity_name(RateQuantity q) {
  switch (q) {
    case RateQuantity::uptake: return "uptake-count";
    case RateQuantity::diagnosis: return "diagnosis-count";
    case RateQuantity::exit: return "exit-count";
  }
  return "?";
}

RateQuantity parse_rate_quantity(std::string_view s) {
  for (auto q : {RateQuantity::uptake, RateQuantity::diagnosis, RateQuantity::exit}) {
    if (rate_quantity_name(q) == s) return q;
  }
  throw std::invalid_argument("unknown rate quantity '" + std::string(s) + "'");
}

double measure_value(const CompartmentState& c, PrevalenceMeasure m) {
  const PrevalenceTheta th = state_to_theta(c);
  switch (m) {
    case PrevalenceMeasure::rho: return th.rho;
    case PrevalenceMeasure::pi: return th.pi;
    case PrevalenceMeasure::delta: return th.delta;
    case PrevalenceMeasure::undiagnosed: return th.rho > 0.0 ? c.u / th.rho : kNaN;
    case PrevalenceMeasure::diagnosed: return c.d;
  }
  return kNaN;
}

double joint_log_likelihood(const CompartmentState& c1, const RateSchedule& schedule,
                            std::span<const PrevalenceDatum> prevalence, std::span<const RateDatum> rates,
                            double h) {
  const Trajectory traj = integrate_trajectory(c1, schedule, h);
  double total = 0.0;
  for (const auto& y : prevalence) {
    if (y.t < 1 || y.t > traj.states.size()) throw std::out_of_range("prevalence datum year outside trajectory");
    const double v = measure_value(traj.states[y.t - 1], y.measure);
    if (std::isnan(v)) return dist::kNegInf;
    if (y.measure == PrevalenceMeasure::diagnosed) {
      total += dist::poisson_log_pmf(y.x, static_cast<double>(y.n) * v);
    } else {
      total += dist::binomial_log_pmf(y.x, y.n, std::clamp(v, 0.0, 1.0));
    }
  }
  for (const auto& z : rates) {
    if (z.t < 1 || z.t > schedule.size()) throw std::out_of_range("rate datum interval outside schedule");
    const auto& r = schedule[z.t - 1];
    double rate = 0.0;
    switch (z.quantity) {
      case RateQuantity::uptake: rate = r.uptake; break;
      case RateQuantity::diagnosis: rate = r.diagnosis; break;
      case RateQuantity::exit: rate = r.exit; break;
    }
    total += dist::poisson_log_pmf(z.x, rate * z.exposure);
  }
  return total;
}

TrajectoryFunction::TrajectoryFunction(std::size_t years, double step) : years_(years), step_(step) {
  if (years_ < 2) throw std::invalid_argument("joint model requires T >= 2");
  steps_per_interval(step_);
}

EvalError TrajectoryFunction::evaluate(std::span<const double> in, std::span<double> out) const {
  CompartmentState x = CompartmentState::from_array(in.subspan(0, 4));
  const std::size_t n = steps_per_interval(step_);
  const double h = 1.0 / static_cast<double>(n);
  auto write = [&](std::size_t t, const CompartmentState& c) {
    out[4 * t + 0] = c.e;
    out[4 * t + 1] = c.s;
    out[4 * t + 2] = c.u;
    out[4 * t + 3] = c.d;
  };
  write(0, x);
  for (std::size_t t = 0; t + 1 < years_; ++t) {
    const auto r = in.subspan(4 + 4 * t, 4);
    const IntervalRates rates = IntervalRates::balanced(r[0], r[1], r[2], r[3]);
    try {
      check_rates(rates);
      for (std::size_t i = 0; i < n; ++i) x = rk4_step(x, rates, h);
    } catch (const SolverError&) {
      return EvalError::domain;
    }
    write(t + 1, x);
  }
  return EvalError::none;
}

}  // namespace evsynth::dynamics
