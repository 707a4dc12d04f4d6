#include <benchmark/benchmark.h>

#include <random>

#include "ressim/diffusion.hpp"
#include "ressim/gsta.hpp"
#include "ressim/seismicity.hpp"

using namespace ressim;

namespace {

struct DiffusionCase {
  DomainGrid grid;
  WellSet wells;
  std::vector<double> q;

  explicit DiffusionCase(int n) : grid(DomainGrid::build_full(30.0, 30.0, n, n)) {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> cell(0, n * n - 1);
    for (int w = 0; w < 29; ++w) wells.add(grid, {cell(rng)});
    q.assign(29, 1e-4);
  }
};

void BM_DiffusionStep(benchmark::State& state) {
  const DiffusionCase c(static_cast<int>(state.range(0)));
  const DiffusionSolver solver(c.grid, DiffusionParams::uniform(c.grid, 5.7e-4, 385.44), c.wells);
  DiffusionSolver::set_threads(static_cast<int>(state.range(1)));
  auto s = PressureState::zero(c.grid);
  StepInfo info;
  for (auto _ : state) {
    s = solver.step(s, c.q, 1e-3, &info);
    benchmark::DoNotOptimize(s.u[0]);
  }
  DiffusionSolver::set_threads(1);
  state.counters["cg_iters"] = info.cg_iterations;
  state.counters["cells"] = static_cast<double>(c.grid.active_count());
}
BENCHMARK(BM_DiffusionStep)->Args({40, 1})->Args({80, 1})->Args({160, 1})->Args({160, 4})->Unit(benchmark::kMicrosecond);

void BM_ApplyOperator(benchmark::State& state) {
  const DiffusionCase c(static_cast<int>(state.range(0)));
  const DiffusionSolver solver(c.grid, DiffusionParams::uniform(c.grid, 5.7e-4, 385.44), c.wells);
  auto u = c.grid.make_field(1.0);
  auto out = c.grid.make_field();
  for (auto _ : state) {
    solver.apply_operator(u.values(), out.values());
    benchmark::DoNotOptimize(out[0]);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(c.grid.active_count()));
}
BENCHMARK(BM_ApplyOperator)->Arg(40)->Arg(160);

void BM_SeismicityStep(benchmark::State& state) {
  const auto g = DomainGrid::build_full(30.0, 30.0, static_cast<int>(state.range(0)), static_cast<int>(state.range(0)));
  const auto params = SrParams::from_density(g.make_field(1.0), 4.7, 1.08e-2, 0.99);
  auto s = SrState::at_rate(params.r_star);
  const auto u_t = g.make_field(-0.05);
  for (auto _ : state) {
    s = step_sr(s, params, u_t, 1e-3);
    benchmark::DoNotOptimize(s.log_r[0]);
  }
}
BENCHMARK(BM_SeismicityStep)->Arg(40)->Arg(160);

void BM_Allocation(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> d;
  const Eigen::Index m = 6, n = state.range(0);
  const Matrix b0 = Matrix::NullaryExpr(m, n, [&] { return d(rng); });
  const Matrix w = Matrix::Constant(2, n, 1.0) + 0.1 * Matrix::NullaryExpr(2, n, [&] { return d(rng); });
  const InputAllocator alloc(b0, w);
  const Vector v = Vector::Ones(m), demand = Vector::Ones(2);
  for (auto _ : state) benchmark::DoNotOptimize(alloc.allocate(v, demand));
}
BENCHMARK(BM_Allocation)->Arg(29)->Arg(200);

void BM_GstaStep(benchmark::State& state) {
  const auto gains = design_gains(1e4, 3e-3, 1.0, 0.0);
  auto st = ControllerState::zero(6);
  st.sigma = Vector::Constant(6, 1e-3);
  for (auto _ : state) benchmark::DoNotOptimize(gsta_step(st, gains, 1e-3));
}
BENCHMARK(BM_GstaStep);

}  // namespace

BENCHMARK_MAIN();
