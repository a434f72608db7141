#include <benchmark/benchmark.h>

#include "evsynth/dynamics.hpp"
#include "evsynth/joint_model.hpp"
#include "evsynth/prevalence_model.hpp"
#include "evsynth/sampler.hpp"

using namespace evsynth;

static void BM_full_model_log_joint(benchmark::State& state) {
    const auto m = prevalence::build_prevalence_graph(prevalence::reference_config());
    Values v = m.graph.initial_values();
    for (auto _ : state) {
        benchmark::DoNotOptimize(log_joint(m.graph, v));
    }
}
BENCHMARK(BM_full_model_log_joint);

static void BM_trajectory(benchmark::State& state) {
    const std::size_t years = state.range(0);
    const dynamics::RateSchedule schedule(years - 1, dynamics::IntervalRates::balanced(0.02, 0.05, 0.6, 0.08));
    const dynamics::CompartmentState c1{0.85, 0.1, 0.03, 0.02};
    for (auto _ : state) {
        benchmark::DoNotOptimize(dynamics::integrate_trajectory(c1, schedule, 0.01));
    }
    state.SetItemsProcessed(state.iterations() * (years - 1) * 100);
}
BENCHMARK(BM_trajectory)->Arg(2)->Arg(8)->Arg(32);

static void BM_sampler_sweeps(benchmark::State& state) {
    const auto m = prevalence::build_prevalence_graph(prevalence::reference_config());
    mcmc::SamplerConfig sc;
    sc.chains = 1;
    sc.burn_in = 0;
    sc.iterations = state.range(0);
    sc.parallel = false;
    for (auto _ : state) {
        benchmark::DoNotOptimize(mcmc::run_chains(m.graph, sc));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_sampler_sweeps)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_joint_log_joint(benchmark::State& state) {
    dynamics::JointSettings s;
    s.years = 8;
    const auto m = dynamics::build_joint_graph(s, {}, {});
    Values v = m.graph.initial_values();
    for (auto _ : state) {
        benchmark::DoNotOptimize(log_joint(m.graph, v));
    }
}
BENCHMARK(BM_joint_log_joint);

BENCHMARK_MAIN();
