// Serial reference kernels against their OpenMP counterparts.
// Thread count follows OMP_NUM_THREADS / MAINTCAUSE_THREADS.

#include <benchmark/benchmark.h>

#include <map>
#include <random>
#include <vector>

#include "maintcause/datagen.hpp"
#include "maintcause/estimators.hpp"
#include "maintcause/kernels.hpp"

using namespace maintcause;

namespace {

struct Tables {
    std::vector<double> base, slope;
    RowMatrix o, f, cost;
    TreatmentGrid grid;

    explicit Tables(std::size_t rows) {
        std::mt19937_64 e(42);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (std::size_t i = 0; i < rows; ++i) {
            base.push_back(4.0 * u(e));
            slope.push_back(0.1 * u(e));
        }
        o = kernels::serial::logistic_curves(7.0, base, slope, grid.points());
        f = kernels::serial::logistic_curves(9.0, base, slope, grid.points());
        cost = kernels::serial::cost_table(o, f, grid.points(), CostParams{30, 207, 104});
    }
};

const Tables& tables(std::size_t rows) {
    static std::map<std::size_t, Tables> cache;
    auto it = cache.find(rows);
    if (it == cache.end()) it = cache.emplace(rows, Tables(rows)).first;
    return it->second;
}

template <bool Parallel>
void BM_LogisticCurves(benchmark::State& s) {
    const auto& t = tables(static_cast<std::size_t>(s.range(0)));
    for (auto _ : s) {
        auto r = Parallel ? kernels::parallel::logistic_curves(7.0, t.base, t.slope, t.grid.points())
                          : kernels::serial::logistic_curves(7.0, t.base, t.slope, t.grid.points());
        benchmark::DoNotOptimize(r.data());
    }
    s.SetItemsProcessed(s.iterations() * s.range(0) * static_cast<long>(t.grid.size()));
}

template <bool Parallel>
void BM_CostTable(benchmark::State& s) {
    const auto& t = tables(static_cast<std::size_t>(s.range(0)));
    const CostParams cp{30, 207, 104};
    for (auto _ : s) {
        auto r = Parallel ? kernels::parallel::cost_table(t.o, t.f, t.grid.points(), cp)
                          : kernels::serial::cost_table(t.o, t.f, t.grid.points(), cp);
        benchmark::DoNotOptimize(r.data());
    }
}

template <bool Parallel>
void BM_RowArgmin(benchmark::State& s) {
    const auto& t = tables(static_cast<std::size_t>(s.range(0)));
    for (auto _ : s) {
        auto r = Parallel ? kernels::parallel::row_argmin(t.cost) : kernels::serial::row_argmin(t.cost);
        benchmark::DoNotOptimize(r.data());
    }
}

template <bool Parallel>
void BM_IntegratedSquaredError(benchmark::State& s) {
    const auto& t = tables(static_cast<std::size_t>(s.range(0)));
    for (auto _ : s) {
        auto r = Parallel ? kernels::parallel::integrated_squared_error(t.o, t.f, 0.1)
                          : kernels::serial::integrated_squared_error(t.o, t.f, 0.1);
        benchmark::DoNotOptimize(r.data());
    }
}

template <bool Parallel>
void BM_ColumnMean(benchmark::State& s) {
    const auto& t = tables(static_cast<std::size_t>(s.range(0)));
    for (auto _ : s) {
        auto r = Parallel ? kernels::parallel::column_mean(t.cost) : kernels::serial::column_mean(t.cost);
        benchmark::DoNotOptimize(r.data());
    }
}

template <bool Parallel>
void BM_PredictCurves(benchmark::State& s) {
    const auto g = generate_dataset(static_cast<std::size_t>(s.range(0)) * 4, 10.0, 1);
    const auto ids = g.dataset.indices(Split::kTest);
    const auto x = g.dataset.feature_matrix(ids);
    const int widths[] = {static_cast<int>(x.cols()) + 1, 64, 64, 1};
    const NetEstimator est(EstimatorKind::kSupervised, OutcomeKind::kOverhauls,
                           nn::Mlp(widths, nn::Activation::kRelu, nn::Activation::kLinear, 3), InputScaling{});
    const TreatmentGrid grid;
    for (auto _ : s) {
        auto r = est.predict_curves(x, grid.points(), Parallel ? Execution::kParallel : Execution::kSerial);
        benchmark::DoNotOptimize(r.data());
    }
}

}  // namespace

#define MAINTCAUSE_PAIR(fn)                                                                    \
    BENCHMARK_TEMPLATE(fn, false)->Name(#fn "/serial")->Arg(1000)->Arg(4000)->UseRealTime();   \
    BENCHMARK_TEMPLATE(fn, true)->Name(#fn "/parallel")->Arg(1000)->Arg(4000)->UseRealTime()

MAINTCAUSE_PAIR(BM_LogisticCurves);
MAINTCAUSE_PAIR(BM_CostTable);
MAINTCAUSE_PAIR(BM_RowArgmin);
MAINTCAUSE_PAIR(BM_IntegratedSquaredError);
MAINTCAUSE_PAIR(BM_ColumnMean);
MAINTCAUSE_PAIR(BM_PredictCurves);

BENCHMARK_MAIN();
