#include "citune/analysis.hpp"
#include "citune/bench.hpp"
#include "citune/excitation.hpp"
#include "citune/tuner.hpp"

#include <benchmark/benchmark.h>

using namespace citune;

namespace {

const Network& network() {
    static const Network net = benchmark_network(MassSpringParams{}, GraphSchedule::ring(6), 50.0, 1e-3);
    return net;
}

const Matrix& identity18() {
    static const Matrix g = Matrix::Identity(18, 18);
    return g;
}

// constants of the default tuning run; fixed here so the SDP cost is measured alone
LmiConstants tuned_constants() {
    LmiConstants c;
    c.iota3_lower = 4.90e-5;
    c.iota3_upper = 0.320;
    c.r4 = 15.95;
    c.window = 0.01;
    return c;
}

void BM_NominalSimulation(benchmark::State& state) {
    const double horizon = static_cast<double>(state.range(0));
    const EstimatorConfig cfg{identity18(), 1.05, 1e-3, horizon};
    const Vector x0 = Vector::Ones(18);
    const Vector theta = MassSpringParams{}.theta(0.0);
    for (auto _ : state) benchmark::DoNotOptimize(simulate_nominal(cfg, network(), x0, theta, {1000, false}));
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(horizon / cfg.step));
}
BENCHMARK(BM_NominalSimulation)->Arg(5)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_GramianOde(benchmark::State& state) {
    const EstimatorConfig cfg{identity18(), 1.05, 1e-4, 50.0};
    for (auto _ : state) benchmark::DoNotOptimize(gramian_ode(network(), cfg, 10.0, 1.0));
}
BENCHMARK(BM_GramianOde)->Unit(benchmark::kMillisecond);

void BM_CpeBounds(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(cpe_bounds(network().bank(), 0.01, 50.0));
}
BENCHMARK(BM_CpeBounds)->Unit(benchmark::kMillisecond);

void BM_EmpiricalIota3(benchmark::State& state) {
    const GainRange range{0.5 * identity18(), 5.0 * identity18()};
    const int starts = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(empirical_iota3(network(), range, 1.05, 0.01, starts));
}
BENCHMARK(BM_EmpiricalIota3)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_FeasibilityOracle(benchmark::State& state) {
    const DisturbanceSpec dist = scenario_disturbance(scenario(5), 6, Variant::output_error);
    const LmiScalars s{2.766e7, 5.767, 5.767, 18.01, 1.0, 1.05};
    const auto insts = make_instances(network(), dist, tuned_constants(), s);
    for (auto _ : state) benchmark::DoNotOptimize(feasibility_oracle(std::span<const LmiInstance>(insts), Variant::output_error));
}
BENCHMARK(BM_FeasibilityOracle)->Unit(benchmark::kMicrosecond);

void BM_SolveSdp(benchmark::State& state) {
    const DisturbanceSpec dist = scenario_disturbance(scenario(5), 6, Variant::output_error);
    const auto insts = make_instances(network(), dist, tuned_constants(), LmiScalars{1.0, 1.0, 1.0, 1.0, 1.0, 1.05});
    for (auto _ : state) benchmark::DoNotOptimize(solve_sdp(std::span<const LmiInstance>(insts), Variant::output_error));
}
BENCHMARK(BM_SolveSdp)->Unit(benchmark::kMillisecond)->Iterations(2);

}  // namespace

BENCHMARK_MAIN();
