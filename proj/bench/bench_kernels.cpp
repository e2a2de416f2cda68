// Serial reference against the OpenMP kernels, plus one full MM fit.
// Run with OMP_NUM_THREADS set to compare thread counts.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "semimix/parallel_kernels.hpp"
#include "semimix/semiparametric_mm.hpp"
#include "semimix/simulation.hpp"

using namespace semimix;

namespace {

struct Fixture {
  std::vector<double> points, weights, wlog;
  UniformGrid grid;
  double h = 0.0;
  Eigen::MatrixXd scores;

  explicit Fixture(std::size_t n) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    for (std::size_t i = 0; i < n; ++i) {
      points.push_back(2.0 * nd(rng));
      weights.push_back(1.0 / static_cast<double>(n));
    }
    h = select_bandwidth(n, KernelConfig::fixed_power());
    grid = UniformGrid::covering(points, h);
    std::vector<double> f(grid.size);
    kernels::serial::grid_density(points, weights, grid, h, f);
    for (std::size_t g = 0; g < grid.size; ++g) wlog.push_back(grid.trapezoid_weight(g) * std::log(f[g] + 1e-300));
    scores = Eigen::MatrixXd::Random(static_cast<Eigen::Index>(n), 3) * 20.0;
  }
};

template <bool Parallel>
void BM_KernelMatrix(benchmark::State& state) {
  const Fixture fx(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto k = Parallel ? kernels::kernel_matrix(fx.points, fx.grid, fx.h)
                      : kernels::serial::kernel_matrix(fx.points, fx.grid, fx.h);
    benchmark::DoNotOptimize(k.data());
  }
}

template <bool Parallel>
void BM_GridDensity(benchmark::State& state) {
  const Fixture fx(static_cast<std::size_t>(state.range(0)));
  std::vector<double> out(fx.grid.size);
  for (auto _ : state) {
    if (Parallel) {
      kernels::grid_density(fx.points, fx.weights, fx.grid, fx.h, out);
    } else {
      kernels::serial::grid_density(fx.points, fx.weights, fx.grid, fx.h, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_SmoothAt(benchmark::State& state) {
  const Fixture fx(static_cast<std::size_t>(state.range(0)));
  std::vector<double> out(fx.points.size());
  for (auto _ : state) {
    if (Parallel) {
      kernels::smooth_at(fx.points, fx.grid, fx.h, fx.wlog, out);
    } else {
      kernels::serial::smooth_at(fx.points, fx.grid, fx.h, fx.wlog, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_NormalizeScores(benchmark::State& state) {
  const Fixture fx(static_cast<std::size_t>(state.range(0)));
  Eigen::MatrixXd t;
  for (auto _ : state) {
    const double ll = Parallel ? kernels::normalize_log_scores(fx.scores, t)
                               : kernels::serial::normalize_log_scores(fx.scores, t);
    benchmark::DoNotOptimize(ll);
  }
}

void BM_MmFit(benchmark::State& state) {
  SimDesign d;
  d.n = static_cast<std::size_t>(state.range(0));
  d.seed = 3;
  const Dataset data = generate(d);
  MMSettings s;
  s.n_starts = 1;
  for (auto _ : state) {
    const MmFit fit = mm_fit(data, 2, LossSpec::quadratic(), s);
    benchmark::DoNotOptimize(fit.result.objective());
  }
}

}  // namespace

BENCHMARK(BM_KernelMatrix<false>)->Name("kernel_matrix/serial")->Arg(2000)->Arg(20000);
BENCHMARK(BM_KernelMatrix<true>)->Name("kernel_matrix/openmp")->Arg(2000)->Arg(20000);
BENCHMARK(BM_GridDensity<false>)->Name("grid_density/serial")->Arg(2000)->Arg(20000);
BENCHMARK(BM_GridDensity<true>)->Name("grid_density/openmp")->Arg(2000)->Arg(20000);
BENCHMARK(BM_SmoothAt<false>)->Name("smooth_at/serial")->Arg(2000)->Arg(20000);
BENCHMARK(BM_SmoothAt<true>)->Name("smooth_at/openmp")->Arg(2000)->Arg(20000);
BENCHMARK(BM_NormalizeScores<false>)->Name("normalize_log_scores/serial")->Arg(20000);
BENCHMARK(BM_NormalizeScores<true>)->Name("normalize_log_scores/openmp")->Arg(20000);
BENCHMARK(BM_MmFit)->Name("mm_fit/case1")->Arg(2000)->Unit(benchmark::kMillisecond)->Iterations(3);

BENCHMARK_MAIN();
