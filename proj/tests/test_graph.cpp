#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "evsynth/distributions.hpp"
#include "evsynth/graph.hpp"
#include "evsynth/graph_io.hpp"
#include "support/generators.hpp"

using namespace evsynth;

namespace {

NodeId unit(GraphBuilder& b, std::string label, double initial = 0.5) {
  return b.add_basic({std::move(label), Support::unit_interval, PriorSpec::uniform(0, 1), initial, "", true});
}

DataItem binomial(std::uint64_t x, std::uint64_t n) {
  DataItem d;
  d.family = Likelihood::binomial;
  d.x = x;
  d.n = n;
  return d;
}

double flat_binomial(std::uint64_t x, std::uint64_t n, double p) {
  return std::lgamma(n + 1.0) - std::lgamma(x + 1.0) - std::lgamma(n - x + 1.0) + x * std::log(p) +
         (n - x) * std::log1p(-p);
}

}  // namespace

TEST(GraphBuild, AddNodes) {
  GraphBuilder b;
  const NodeId pi = unit(b, "pi");
  EXPECT_EQ(b.size(), 1u);
  const NodeId delta = unit(b, "delta");
  b.add_functional({"u", ref(pi) * (constant(1) - ref(delta)), ValueRange::probability});
  EXPECT_EQ(b.size(), 3u);
  const auto g = std::move(b).freeze();
  EXPECT_EQ(g.label(pi), "pi");
  EXPECT_EQ(g.at("u").index, 2u);
}

TEST(GraphBuild, Errors) {
  GraphBuilder b;
  unit(b, "pi");
  EXPECT_THROW(unit(b, "pi"), GraphError);
  try {
    b.add_data({"y", {NodeId{42}}, binomial(1, 2), std::nullopt});
    FAIL();
  } catch (const GraphError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown parent"), std::string::npos);
  }
  EXPECT_THROW(b.add_basic({"s", Support::positive_real, PriorSpec::half_normal(0.0), 1.0, "", true}), GraphError);
  EXPECT_THROW(b.add_basic({"w", Support::real, PriorSpec::uniform(1, 1), 1.0, "", true}), GraphError);
}

TEST(Evaluate, Examples) {
  GraphBuilder b;
  const NodeId rho = unit(b, "rho"), pi = unit(b, "pi"), delta = unit(b, "delta"), k = unit(b, "k");
  const NodeId u = b.add_functional({"u", ref(rho) * ref(pi) * (constant(1) - ref(delta)), ValueRange::probability});
  const NodeId id = b.add_functional({"id", ref(k), ValueRange::probability});
  std::vector<NodeId> shares;
  for (std::size_t i = 0; i < 3; ++i) {
    shares.push_back(b.add_functional({"share" + std::to_string(i),
                                       normalized_share(i, {constant(2), constant(3), constant(5)}),
                                       ValueRange::probability}));
  }
  const auto g = std::move(b).freeze();
  Values v = g.initial_values();
  v[rho.index] = 1.0;
  v[pi.index] = 0.1;
  v[delta.index] = 0.0;
  v[k.index] = 0.42;
  evaluate_functionals(g, v);
  EXPECT_DOUBLE_EQ(v[u.index], 0.1);
  EXPECT_EQ(v[id.index], 0.42);
  EXPECT_DOUBLE_EQ(v[shares[0].index], 0.2);
  EXPECT_DOUBLE_EQ(v[shares[1].index], 0.3);
  EXPECT_DOUBLE_EQ(v[shares[2].index], 0.5);

  Values again = v;
  evaluate_functionals(g, again);
  EXPECT_EQ(0, std::memcmp(v.data(), again.data(), v.size() * sizeof(double)));
}

TEST(Evaluate, Errors) {
  GraphBuilder b;
  const NodeId a = unit(b, "a");
  b.add_functional({"r", constant(1) / (ref(a) - ref(a)), ValueRange::real});
  const auto g = std::move(b).freeze();
  Values v = g.initial_values();
  EXPECT_THROW(evaluate_functionals(g, v), EvaluationError);

  GraphBuilder c;
  unit(c, "p");
  const auto h = std::move(c).freeze();
  Values w = h.initial_values();
  w[0] = 1.5;
  EXPECT_THROW(evaluate_functionals(h, w), EvaluationError);
}

TEST(LogJoint, Examples) {
  GraphBuilder b;
  const NodeId pi = unit(b, "pi");
  b.add_data({"y", {pi}, binomial(5, 10), std::nullopt});
  const auto g = std::move(b).freeze();
  Values v = g.initial_values();
  EXPECT_NEAR(log_joint(g, v), -1.402043, 1e-6);
  EXPECT_NEAR(log_joint(g, v), std::log(252.0) - 10 * std::log(2.0), 1e-12);
  v[pi.index] = 0.0;
  EXPECT_EQ(log_joint(g, v), -std::numeric_limits<double>::infinity());

  GraphBuilder c;
  unit(c, "pi", 0.3);
  const auto prior_only = std::move(c).freeze();
  EXPECT_EQ(log_joint(prior_only, prior_only.initial_values()), 0.0);
}

TEST(LogJoint, DecomposesAndMatchesFlatImplementation) {
  // Random graphs: up to three unit-interval parameters with uniform or
  // normal-on-logit style priors, products as functionals, binomial data.
  evsynth::testing::Gen gen(2024);
  for (int trial = 0; trial < 200; ++trial) {
    GraphBuilder b;
    const std::size_t k = gen.integer(1, 3);
    std::vector<NodeId> basics;
    std::vector<double> values;
    for (std::size_t i = 0; i < k; ++i) {
      values.push_back(gen.uniform(0.01, 0.99));
      basics.push_back(unit(b, "p" + std::to_string(i), values.back()));
    }
    const bool with_product = k >= 2 && gen.uniform() < 0.5;
    std::optional<NodeId> prod;
    if (with_product) prod = b.add_functional({"prod", ref(basics[0]) * ref(basics[1]), ValueRange::probability});
    struct Datum {
      double p;
      std::uint64_t x, n;
    };
    std::vector<Datum> data;
    const std::size_t nd = 5 - b.size() > 0 ? gen.integer(0, 5 - b.size()) : 0;
    for (std::size_t j = 0; j < nd; ++j) {
      const std::uint64_t n = gen.integer(1, 30), x = gen.integer(0, n);
      const bool on_prod = prod && gen.uniform() < 0.5;
      const std::size_t which = gen.integer(0, k - 1);
      const NodeId target = on_prod ? *prod : basics[which];
      b.add_data({"y" + std::to_string(j), {target}, binomial(x, n), std::nullopt});
      data.push_back({on_prod ? values[0] * values[1] : values[which], x, n});
    }
    const auto g = std::move(b).freeze();
    Values v = g.initial_values();

    double flat = 0.0;
    for (const auto& d : data) flat += flat_binomial(d.x, d.n, d.p);
    EXPECT_NEAR(log_joint(g, v), flat, 1e-9);
    EXPECT_NEAR(log_joint(g, v), log_prior(g, v) + log_likelihood(g, v), 1e-12);
    EXPECT_EQ(log_prior(g, v), 0.0);
  }
}

TEST(LogJoint, AddingDataLeavesPriorUnchanged) {
  auto build = [](bool with_data) {
    GraphBuilder b;
    const NodeId m = b.add_basic({"m", Support::real, PriorSpec::normal(0.2, 1.5), 0.7, "", true});
    const NodeId s = b.add_basic({"s", Support::positive_real, PriorSpec::half_normal(0.4), 0.3, "", true});
    const NodeId p = b.add_functional({"p", expit(ref(m)), ValueRange::probability});
    (void)s;
    if (with_data) b.add_data({"y", {p}, binomial(3, 9), std::nullopt});
    return std::move(b).freeze();
  };
  const auto g0 = build(false), g1 = build(true);
  const double expected = dist::normal_log_pdf(0.7, 0.2, 1.5) + dist::half_normal_log_pdf(0.3, 0.4);
  EXPECT_NEAR(log_prior(g0, g0.initial_values()), expected, 1e-14);
  EXPECT_EQ(log_prior(g0, g0.initial_values()), log_prior(g1, g1.initial_values()));
}

TEST(Graph, TopologicalOrderRespectsParents) {
  GraphBuilder b;
  const NodeId mean = b.add_basic({"P", Support::real, PriorSpec::normal(0, 10), 0.0, "", true});
  const NodeId sd = b.add_basic({"sigma", Support::positive_real, PriorSpec::half_normal(1), 0.5, "", true});
  const NodeId lor = b.add_basic({"lor", Support::real, PriorSpec::hierarchical_normal(mean, sd), 0.1, "", true});
  const NodeId f = unit(b, "f");
  const NodeId m = b.add_functional({"m", expit(ref(lor) + logit(ref(f))), ValueRange::probability});
  b.add_data({"y", {m}, binomial(1, 4), std::nullopt});
  const auto g = std::move(b).freeze();
  const auto order = g.topological_order();
  std::vector<std::size_t> pos(g.size());
  for (std::size_t i = 0; i < order.size(); ++i) pos[order[i].index] = i;
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (NodeId p : g.parents(NodeId{static_cast<std::uint32_t>(i)})) EXPECT_LT(pos[p.index], pos[i]);
  }
}

TEST(Graph, SimplexBlock) {
  GraphBuilder b;
  const auto ids = b.add_simplex_block("rho", {"rho.a", "rho.b", "rho.c"}, {1, 1, 1});
  const auto g = std::move(b).freeze();
  EXPECT_EQ(g.free_parameter_count(), 2u);
  Values v = g.initial_values();
  EXPECT_NEAR(v[ids[0].index] + v[ids[1].index] + v[ids[2].index], 1.0, 1e-15);
  EXPECT_NEAR(log_prior(g, v), std::log(2.0), 1e-12);
  EXPECT_EQ(g.block_of(ids[1]), std::optional<std::size_t>(0));
}

TEST(Graph, LocalTermsCoverChangedParameter) {
  GraphBuilder b;
  const NodeId a = unit(b, "a"), c = unit(b, "c");
  const NodeId fa = b.add_functional({"fa", ref(a) * ref(a), ValueRange::probability});
  const NodeId fc = b.add_functional({"fc", ref(c) * constant(0.5), ValueRange::probability, "", true});
  b.add_data({"ya", {fa}, binomial(1, 3), std::nullopt});
  const auto g = std::move(b).freeze();
  const std::vector<NodeId> changed{c};
  const auto all = g.local_terms(changed);
  ASSERT_EQ(all.steps.size(), 1u);
  EXPECT_EQ(all.steps[0].index, fc.index);
  EXPECT_TRUE(all.data.empty());
  EXPECT_TRUE(g.local_terms(changed, true).steps.empty());
}

TEST(GraphIo, RoundTrip) {
  GraphBuilder b;
  const auto rho = b.add_simplex_block("rho", {"rho.a", "rho.b"}, {1, 2}, "rho", {0.3, 0.7});
  const NodeId mean = b.add_basic({"P", Support::real, PriorSpec::normal(0, 100), 0.1, "hyper", true});
  const NodeId sd = b.add_basic({"sigma", Support::positive_real, PriorSpec::half_normal(0.134), 0.2, "hyper", true});
  const NodeId lor = b.add_basic({"lor", Support::real, PriorSpec::hierarchical_normal(mean, sd), -0.3, "lor", true});
  const NodeId f = unit(b, "f", 0.123456789);
  const NodeId m = b.add_functional({"m", expit(ref(lor) + logit(ref(f))), ValueRange::probability, "pi", true});
  const NodeId mix = b.add_functional(
      {"mix", weighted_mixture({2.0, 1.0}, {ref(rho[0]), ref(rho[1])}, {ref(m), ref(f)}), ValueRange::probability});
  b.add_data({"y", {mix}, binomial(4, 17), std::nullopt});
  DataItem pois;
  pois.family = Likelihood::poisson;
  pois.x = 12;
  pois.offset = 1000.0;
  b.add_data({"z", {m}, pois, std::nullopt});
  const auto g = std::move(b).freeze();
  const std::string text = serialize_graph(g);
  const auto back = parse_graph(text);
  EXPECT_EQ(serialize_graph(back), text);
  EXPECT_EQ(log_joint(back, back.initial_values()), log_joint(g, g.initial_values()));
  EXPECT_THROW(parse_graph("(graph (basic \"x\""), ParseError);
}

TEST(FormatDouble, ShortestRoundTrip) {
  evsynth::testing::Gen gen(8);
  for (int i = 0; i < 1000; ++i) {
    const double v = gen.uniform(-1e6, 1e6) * std::pow(10.0, gen.uniform(-20, 20));
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
}
