#include <benchmark/benchmark.h>

#include <cmath>

#include "mf/approx.hpp"
#include "mf/auction.hpp"
#include "mf/cdf.hpp"
#include "mf/collocation.hpp"
#include "mf/dyn_auction.hpp"
#include "mf/queue_sim.hpp"
#include "mf/queueing.hpp"
#include "mf/shooting.hpp"

using namespace mf;

static void BM_ErlangC(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(erlang_c(n, 0.83));
}
BENCHMARK(BM_ErlangC)->Arg(2)->Arg(64);

static void BM_ErrorBoundStatic(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    PayoffSpec p;
    p.n = n;
    p.a_low = -2.0;
    p.a_high = 3.0;
    p.evaluate = [](const Profile& a) {
        double s = 0.0, sq = 0.0;
        for (double x : a) {
            s += x;
            sq += x * x;
        }
        const double m = s / static_cast<double>(a.size());
        return 0.3 * m * m + 0.7 * sq / static_cast<double>(a.size()) + 0.1 * m;
    };
    Profile act(static_cast<std::size_t>(n));
    for (std::size_t j = 0; j < act.size(); ++j)
        act[j] = 0.5 + 0.3 * std::sin(static_cast<double>(j) + 1.0);
    const auto prof = ActionProfile::from_actions(act);
    for (auto _ : state) benchmark::DoNotOptimize(error_bound_static(p, prof, 0.5).bound);
}
BENCHMARK(BM_ErrorBoundStatic)->Arg(2)->Arg(8);

static void BM_ShootingUniformPair(benchmark::State& state) {
    const auto vm = ValuationModel::make({make_uniform_cdf(), make_uniform_cdf()});
    for (auto _ : state) benchmark::DoNotOptimize(solve_shooting(vm).b_high);
}
BENCHMARK(BM_ShootingUniformPair);

static void BM_CollocationPowerPair(benchmark::State& state) {
    const auto vm = ValuationModel::make({make_power_cdf(7.0), make_power_cdf(8.0)});
    for (auto _ : state) benchmark::DoNotOptimize(solve_collocation(vm).objective);
}
BENCHMARK(BM_CollocationPowerPair);

static void BM_SellerRevenueMc(benchmark::State& state) {
    const auto vm = ValuationModel::make({make_uniform_cdf(), make_uniform_cdf()});
    const auto sol = solve_collocation(vm);
    for (auto _ : state) benchmark::DoNotOptimize(seller_revenue(vm, sol, 10000, 7).mc);
}
BENCHMARK(BM_SellerRevenueMc);

static void BM_SimulateMmn(benchmark::State& state) {
    const auto q = QueueModel::make(5.0, {3.0, 3.0});
    for (auto _ : state)
        benchmark::DoNotOptimize(simulate_mmn(q, 1000.0, 1, 7).mean_wait.mean);
}
BENCHMARK(BM_SimulateMmn);

static void BM_ValueIterationOnePeriod(benchmark::State& state) {
    const auto cfg = DynAuctionConfig::uniform_symmetric(2, 1);
    for (auto _ : state) benchmark::DoNotOptimize(value_iteration(cfg).value0(0, 4.0));
}
BENCHMARK(BM_ValueIterationOnePeriod);

BENCHMARK_MAIN();
