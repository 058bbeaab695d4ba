#include <benchmark/benchmark.h>

#include "vdlab/adjoint.hpp"
#include "vdlab/hj_solvers.hpp"

using namespace vdlab;

namespace {

struct Fixture {
  TorusGrid grid;
  HamiltonianModel model;
  ErgodicResult ergodic;
  SolveConfig cfg;
};

Fixture model_a(int n) {
  TorusGrid g(1, n);
  auto m = make_model("A");
  auto e = compute_ergodic_constant(m, g, 1e-4, SolveConfig{});
  SolveConfig cfg;
  cfg.sigma = e.sigma;
  return {g, m, e, cfg};
}

void BM_Ergodic(benchmark::State& state) {
  TorusGrid g(1, static_cast<int>(state.range(0)));
  auto m = make_model("A");
  for (auto _ : state) benchmark::DoNotOptimize(compute_ergodic_constant(m, g, 1e-4, SolveConfig{}).c);
}
BENCHMARK(BM_Ergodic)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Discounted(benchmark::State& state) {
  auto f = model_a(static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(solve_discounted(f.model, f.grid, 1e-3, 1e-6, f.ergodic.c, f.cfg).residual);
}
BENCHMARK(BM_Discounted)->Arg(64)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_Discounted2D(benchmark::State& state) {
  TorusGrid g(2, static_cast<int>(state.range(0)));
  auto m = make_model("A", "zero", 2);
  auto e = compute_ergodic_constant(m, g, 1e-4, SolveConfig{});
  SolveConfig cfg;
  cfg.sigma = e.sigma;
  for (auto _ : state) benchmark::DoNotOptimize(solve_discounted(m, g, 1e-2, 1e-4, e.c, cfg).residual);
}
BENCHMARK(BM_Discounted2D)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Adjoint(benchmark::State& state) {
  auto f = model_a(static_cast<int>(state.range(0)));
  auto u = solve_discounted(f.model, f.grid, 1e-3, 1e-6, f.ergodic.c, f.cfg);
  for (auto _ : state) benchmark::DoNotOptimize(solve_adjoint(f.model, u.field, 1e-3, 1e-6, 0).normalization);
}
BENCHMARK(BM_Adjoint)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_MatherLp(benchmark::State& state) {
  TorusGrid g(1, static_cast<int>(state.range(0)));
  auto m = make_model("A");
  for (auto _ : state) benchmark::DoNotOptimize(lp_mather_oracle(m, g, VelocityGrid{}, 1.0, 5).min_action);
}
BENCHMARK(BM_MatherLp)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
