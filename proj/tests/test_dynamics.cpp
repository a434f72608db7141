#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "evsynth/distributions.hpp"
#include "evsynth/dynamics.hpp"
#include "evsynth/graph_io.hpp"
#include "evsynth/joint_model.hpp"
#include "evsynth/synthgen.hpp"
#include "support/generators.hpp"

using namespace evsynth;
using namespace evsynth::dynamics;

namespace {

IntervalRates chain_rates(double alpha, double beta) {
  IntervalRates r;
  r.incidence = alpha;
  r.diagnosis = beta;
  return r;
}

}  // namespace

TEST(OdeRhs, Examples) {
  const CompartmentState c{0.5, 0.3, 0.15, 0.05};
  for (double v : ode_rhs(c, IntervalRates{})) EXPECT_EQ(v, 0.0);

  const auto single = ode_rhs(CompartmentState{0, 1, 0, 0}, chain_rates(1.0, 0.0));
  EXPECT_EQ(single[1], -1.0);
  EXPECT_EQ(single[2], 1.0);

  const auto r = IntervalRates::balanced(0.1, 0.2, 0.5, 0.02);
  EXPECT_EQ(r.entry, 0.02);
  const auto d = ode_rhs(c, r);
  EXPECT_NEAR(d[0], 0.02 - (0.1 + 0.02) * 0.5, 1e-15);
  EXPECT_NEAR(d[1], 0.1 * 0.5 - (0.2 + 0.02) * 0.3, 1e-15);
  EXPECT_NEAR(d[2], 0.2 * 0.3 - (0.5 + 0.02) * 0.15, 1e-15);
  EXPECT_NEAR(d[3], 0.5 * 0.15 - 0.02 * 0.05, 1e-15);
  EXPECT_NEAR(d[0] + d[1] + d[2] + d[3], 0.0, 1e-15);
}

TEST(Rk4, Examples) {
  const auto step = rk4_step(CompartmentState{0, 1, 0, 0}, chain_rates(1.0, 0.0), 0.1);
  EXPECT_NEAR(step.s, 0.90483750, 1e-8);
  EXPECT_NEAR(step.s, std::exp(-0.1), 1e-7);
  const CompartmentState c{0.5, 0.3, 0.15, 0.05};
  EXPECT_EQ(rk4_step(c, IntervalRates{}, 0.1), c);
  const auto b = rk4_step(c, IntervalRates::balanced(0.3, 0.4, 1.2, 0.05), 0.01);
  EXPECT_NEAR(b.sum(), 1.0, 1e-12);
  EXPECT_THROW(rk4_step(CompartmentState{0, 1, 0, 0}, chain_rates(50.0, 0.0), 1.0), SolverError);
}

TEST(Integrate, ClosedFormChains) {
  const auto two = integrate_interval(CompartmentState{0, 1, 0, 0}, chain_rates(0.5, 0.0), 0.01);
  EXPECT_NEAR(two.s, 0.606531, 1e-6);
  EXPECT_NEAR(two.s, std::exp(-0.5), 1e-8);
  const auto three = integrate_interval(CompartmentState{0, 1, 0, 0}, chain_rates(0.5, 1.0), 0.01);
  EXPECT_NEAR(three.u, 0.238651, 1e-6);
  EXPECT_NEAR(three.u, 0.5 / 0.5 * (std::exp(-0.5) - std::exp(-1.0)), 1e-7);
  EXPECT_THROW(integrate_interval(CompartmentState{0, 1, 0, 0}, chain_rates(0.5, 1.0), 0.3), SolverError);
}

TEST(Integrate, LinearChainOracleGrid) {
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      const double alpha = 0.1 + 1.9 * i / 4.0, beta = 0.1 + 1.9 * j / 4.0;
      const auto c = integrate_interval(CompartmentState{0, 1, 0, 0}, chain_rates(alpha, beta), 0.01);
      const auto o = synth::linear_chain_oracle(alpha, beta, 1.0);
      EXPECT_NEAR(c.s, o.s, 1e-6);
      EXPECT_NEAR(c.u, o.u, 1e-6);
      EXPECT_NEAR(c.d, o.d, 1e-6);
    }
  }
}

TEST(Integrate, FourthOrderConvergence) {
  evsynth::testing::Gen gen(31);
  const auto r = IntervalRates::balanced(gen.uniform(0.1, 1), gen.uniform(0.1, 2), gen.uniform(0.1, 3), gen.uniform(0, 0.5));
  const CompartmentState c{0.6, 0.3, 0.07, 0.03};
  const auto a = integrate_interval(c, r, 0.04), b = integrate_interval(c, r, 0.02), d = integrate_interval(c, r, 0.01);
  const double coarse = std::abs(a.u - b.u) + std::abs(a.s - b.s);
  const double fine = std::abs(b.u - d.u) + std::abs(b.s - d.s);
  EXPECT_GE(coarse / fine, 14.0);
  EXPECT_GE(std::log2(coarse / fine), 3.9);
}

TEST(Integrate, ConservationAndMonotonicity) {
  evsynth::testing::Gen gen(2);
  for (int trial = 0; trial < 20; ++trial) {
    RateSchedule schedule;
    for (int t = 0; t < 9; ++t) {
      schedule.push_back(IntervalRates::balanced(gen.uniform(0, 1), gen.uniform(0, 0.5), gen.uniform(0, 3), gen.uniform(0, 0.5)));
    }
    const auto v = gen.simplex(4);
    const auto traj = integrate_trajectory(CompartmentState::from_array(v), schedule, 0.01);
    ASSERT_EQ(traj.states.size(), 10u);
    for (const auto& s : traj.states) {
      EXPECT_NEAR(s.sum(), 1.0, 1e-9);
      for (double x : s.as_array()) EXPECT_GE(x, -1e-9);
    }
  }
  RateSchedule pure(9, chain_rates(0.3, 0.8));
  const auto traj = integrate_trajectory(CompartmentState{0, 0.9, 0.06, 0.04}, pure, 0.01);
  for (std::size_t t = 1; t < traj.states.size(); ++t) {
    EXPECT_LE(traj.states[t].s, traj.states[t - 1].s);
    EXPECT_GE(traj.states[t].d, traj.states[t - 1].d);
  }
}

TEST(Integrate, Deterministic) {
  RateSchedule schedule(6, IntervalRates::balanced(0.2, 0.3, 0.9, 0.1));
  const auto a = integrate_trajectory(CompartmentState{0.7, 0.2, 0.06, 0.04}, schedule, 0.01);
  const auto b = integrate_trajectory(CompartmentState{0.7, 0.2, 0.06, 0.04}, schedule, 0.01);
  ASSERT_EQ(a.states.size(), b.states.size());
  EXPECT_EQ(0, std::memcmp(a.states.data(), b.states.data(), a.states.size() * sizeof(CompartmentState)));
}

TEST(Theta, Examples) {
  const auto th = state_to_theta(CompartmentState{0.9, 0.09, 0.004, 0.006});
  EXPECT_NEAR(th.rho, 0.1, 1e-15);
  EXPECT_NEAR(th.pi, 0.1, 1e-14);
  EXPECT_NEAR(th.delta, 0.6, 1e-14);
  const auto nodiag = state_to_theta(CompartmentState{0.5, 0.4, 0.1, 0.0});
  EXPECT_EQ(nodiag.delta, 0.0);
  const auto none = state_to_theta(CompartmentState{0.5, 0.5, 0.0, 0.0});
  EXPECT_FALSE(none.delta_defined);
  EXPECT_TRUE(std::isnan(none.delta));

  evsynth::testing::Gen gen(6);
  for (int i = 0; i < 1000; ++i) {
    PrevalenceTheta t;
    t.rho = gen.uniform(0.01, 1);
    t.pi = gen.uniform(0.01, 1);
    t.delta = gen.uniform(0, 1);
    const auto back = state_to_theta(theta_to_state(t.rho, t.pi, t.delta));
    EXPECT_NEAR(back.rho, t.rho, 1e-12);
    EXPECT_NEAR(back.pi, t.pi, 1e-12);
    EXPECT_NEAR(back.delta, t.delta, 1e-12);
  }
}

TEST(JointLikelihood, Examples) {
  const CompartmentState c1{0.8, 0.15, 0.03, 0.02};
  RateSchedule schedule(2, IntervalRates::balanced(0.1, 0.1, 0.5, 0.05));
  EXPECT_EQ(joint_log_likelihood(c1, schedule, {}, {}), 0.0);
  const std::vector<RateDatum> z{{1, RateQuantity::diagnosis, 5, 10.0}};
  EXPECT_NEAR(joint_log_likelihood(c1, schedule, {}, z), dist::poisson_log_pmf(5, 5.0), 1e-12);
  EXPECT_NEAR(dist::poisson_log_pmf(5, 5.0), -1.7403, 1e-4);

  const std::vector<PrevalenceDatum> y{{1, PrevalenceMeasure::pi, 12, 100}, {3, PrevalenceMeasure::delta, 30, 50},
                                       {2, PrevalenceMeasure::diagnosed, 40, 1000}};
  const auto traj = integrate_trajectory(c1, schedule, kDefaultStep);
  const auto t1 = state_to_theta(traj.states[0]), t3 = state_to_theta(traj.states[2]);
  const double expected = dist::binomial_log_pmf(12, 100, t1.pi) + dist::binomial_log_pmf(30, 50, t3.delta) +
                          dist::poisson_log_pmf(40, 1000 * traj.states[1].d);
  EXPECT_NEAR(joint_log_likelihood(c1, schedule, y, {}), expected, 1e-12);
}

TEST(JointModel, GraphMatchesDirectLikelihood) {
  JointSettings s;
  s.years = 4;
  const std::vector<PrevalenceDatum> y{{1, PrevalenceMeasure::rho, 30, 200}, {4, PrevalenceMeasure::undiagnosed, 3, 300}};
  const std::vector<RateDatum> z{{2, RateQuantity::uptake, 4, 20.0}, {3, RateQuantity::exit, 2, 30.0}};
  const auto m = build_joint_graph(s, y, z);
  EXPECT_EQ(m.rates.size(), 3u);
  EXPECT_EQ(m.graph.free_parameter_count(), 3u + 12u);
  Values v = m.graph.initial_values();
  RateSchedule schedule;
  for (std::size_t t = 1; t < 4; ++t) {
    schedule.push_back(IntervalRates::balanced(v[m.rate(RateKind::uptake, t).index], v[m.rate(RateKind::incidence, t).index],
                                               v[m.rate(RateKind::diagnosis, t).index], v[m.rate(RateKind::exit, t).index]));
  }
  const CompartmentState c1{v[m.c1[0].index], v[m.c1[1].index], v[m.c1[2].index], v[m.c1[3].index]};
  EXPECT_NEAR(log_likelihood(m.graph, v), joint_log_likelihood(c1, schedule, y, z), 1e-10);

  const auto back = parse_graph(serialize_graph(m.graph));
  EXPECT_EQ(log_joint(back, back.initial_values()), log_joint(m.graph, v));

  s.years = 1;
  try {
    build_joint_graph(s, {}, {});
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "joint model requires T >= 2");
  }
}

TEST(JointModel, CsvRoundTrip) {
  const std::vector<PrevalenceDatum> y{{1, PrevalenceMeasure::pi, 12, 100}, {2, PrevalenceMeasure::diagnosed, 40, 1000}};
  const std::vector<RateDatum> z{{1, RateQuantity::diagnosis, 5, 10.5}};
  const auto y2 = parse_prevalence_csv(format_prevalence_csv(y));
  const auto z2 = parse_rate_csv(format_rate_csv(z));
  EXPECT_EQ(format_prevalence_csv(y2), format_prevalence_csv(y));
  EXPECT_EQ(format_rate_csv(z2), format_rate_csv(z));
  EXPECT_TRUE(format_rate_csv(z).starts_with("t,quantity,x,exposure\n"));
  EXPECT_THROW(parse_rate_csv("t,quantity,x,exposure\n1,diagnosis-count,5\n"), ParseError);
}
