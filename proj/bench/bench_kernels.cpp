#include <random>

#include <benchmark/benchmark.h>

#include "prices/fixtures.hpp"
#include "prices/imputation.hpp"
#include "prices/io_engine.hpp"
#include "prices/kernels.hpp"
#include "prices/log.hpp"

using namespace prices;

namespace {

kernels::Execution mode(const benchmark::State& state) {
    return state.range(1) == 0 ? kernels::Execution::serial : kernels::Execution::parallel;
}

Eigen::MatrixXd random_technology(Eigen::Index n) {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) a(i, j) = u(gen);
        a.col(j) *= 0.6 / a.col(j).sum();
    }
    return a;
}

void BM_matmul(benchmark::State& state) {
    const auto a = random_technology(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(kernels::matmul(a, a, mode(state)));
}

void BM_neumann(benchmark::State& state) {
    const auto tm = io::TechnologyMatrix::from_coefficients(random_technology(state.range(0)));
    io::NeumannOptions opt;
    opt.tolerance = 1e-10;
    for (auto _ : state)
        benchmark::DoNotOptimize(io::leontief_inverse(tm, io::LeontiefMethod::neumann, opt, mode(state)));
}

void BM_impute(benchmark::State& state) {
    log::set_level(log::Level::quiet);
    const auto survey = fixtures::households();
    fixtures::HouseholdFixtureOptions fo;
    fo.households = static_cast<std::size_t>(state.range(0));
    fo.seed = 99;
    auto income = fixtures::households(fo);
    for (auto& h : income) h.expenditure.clear();
    imputation::ImputationOptions opt;
    opt.exec = mode(state);
    for (auto _ : state) benchmark::DoNotOptimize(imputation::impute(survey, income, opt));
}

}  // namespace

BENCHMARK(BM_matmul)->ArgsProduct({{64, 256}, {0, 1}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_neumann)->ArgsProduct({{64, 256}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_impute)->ArgsProduct({{2000}, {0, 1}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
