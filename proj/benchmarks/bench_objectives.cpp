#include <benchmark/benchmark.h>

#include "pinnscape/autodiff/objective.hpp"
#include "pinnscape/network.hpp"
#include "pinnscape/problems.hpp"
#include "pinnscape/rng.hpp"

using namespace pinnscape;

namespace {

struct Case {
  Objective objective;
  ParamVector theta;
  ParamVector direction;
};

Case make_case(int64_t index) {
  const Problem p = index < 2 ? Problem::Elliptic1D : Problem::Neohookean2D;
  const Formulation f = index % 2 == 0 ? Formulation::Drm : Formulation::Pinn;
  Objective obj(ObjectiveConfig::reference(p, f));
  ParamVector theta = init_params(obj.network(), 0);
  ParamVector dir = init_params(obj.network(), 1);
  return {std::move(obj), std::move(theta), dir.normalized()};
}

void label(benchmark::State& state, const Objective& obj) {
  state.SetLabel(to_string(obj.kind()) + " n=" + std::to_string(obj.dimension()));
}

}  // namespace

static void BM_Value(benchmark::State& state) {
  const Case c = make_case(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(c.objective.value(c.theta));
  label(state, c.objective);
}
BENCHMARK(BM_Value)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

static void BM_Gradient(benchmark::State& state) {
  const Case c = make_case(state.range(0));
  ParamVector grad;
  for (auto _ : state) {
    benchmark::DoNotOptimize(c.objective.value_and_gradient(c.theta, grad));
    benchmark::ClobberMemory();
  }
  label(state, c.objective);
}
BENCHMARK(BM_Gradient)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

static void BM_HessianVector(benchmark::State& state) {
  const Case c = make_case(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(hessian_vector(c.objective, c.theta, c.direction));
  label(state, c.objective);
}
BENCHMARK(BM_HessianVector)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

// Dense Hessians are only practical for the 1D nets here.
static void BM_Hessian(benchmark::State& state) {
  const Case c = make_case(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(hessian(c.objective, c.theta));
  label(state, c.objective);
}
BENCHMARK(BM_Hessian)->DenseRange(0, 1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
