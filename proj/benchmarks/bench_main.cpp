#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "mmflow/flow.hpp"
#include "mmflow/jko.hpp"
#include "mmflow/lp.hpp"
#include "mmflow/transport.hpp"

namespace {

using namespace mmflow;

ParticleDensity random_density(std::mt19937_64& rng, const Domain& d, std::size_t n) {
    std::uniform_real_distribution<double> u(d.lower, d.upper);
    std::vector<double> x(n);
    for (double& v : x) {
        v = u(rng);
    }
    std::sort(x.begin(), x.end());
    return ParticleDensity(d, std::move(x));
}

void BM_ProjectOrderedBox(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.5, 0.3);
    std::vector<double> y(n);
    for (double& v : y) {
        v = g(rng);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(project_ordered_box(y, 0.0, 1.0));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ProjectOrderedBox)->RangeMultiplier(4)->Range(64, 16384)->Complexity();

void BM_EntropyStep(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Domain d(0.0, 1.0);
    std::vector<double> x(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double u = (static_cast<double>(j) + 0.5) / static_cast<double>(n);
        x[j] = 0.2 + 0.6 * u * u;
    }
    const ParticleDensity rho(d, x);
    const StepProblem p({rho, rho}, 0, InternalEnergy::entropy(), CostFunction::zero(d, 2), 1e-2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_step(p));
    }
}
BENCHMARK(BM_EntropyStep)->Arg(32)->Arg(128)->Arg(512);

void BM_BarycenterStep(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Domain d(0.0, 1.0);
    std::mt19937_64 rng(7);
    std::vector<ParticleDensity> tuple{random_density(rng, d, n), random_density(rng, d, n),
                                       random_density(rng, d, n)};
    const StepProblem p(tuple, 0, InternalEnergy::entropy(), CostFunction::barycenter(d, {1.0, 1.0}, 0), 1e-2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_step(p));
    }
}
BENCHMARK(BM_BarycenterStep)->Arg(32)->Arg(128);

void BM_LpOracle(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Domain d(0.0, 1.0);
    std::mt19937_64 rng(3);
    std::vector<DiscreteMeasure> m;
    for (int i = 0; i < 3; ++i) {
        m.emplace_back(random_density(rng, d, n));
    }
    const auto cost = CostFunction::barycenter(d, {1.0, 1.0});
    for (auto _ : state) {
        benchmark::DoNotOptimize(lp_solve_mm(m, cost));
    }
}
BENCHMARK(BM_LpOracle)->Arg(3)->Arg(5);

void BM_MonotonePlan(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Domain d(0.0, 1.0);
    std::mt19937_64 rng(5);
    std::vector<ParticleDensity> tuple{random_density(rng, d, n), random_density(rng, d, n),
                                       random_density(rng, d, n)};
    const auto cost = CostFunction::barycenter(d, {1.0, 1.0});
    for (auto _ : state) {
        benchmark::DoNotOptimize(monotone_plan(tuple, cost));
    }
}
BENCHMARK(BM_MonotonePlan)->Arg(128)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
