#include <benchmark/benchmark.h>

#include "wglasso/forward.hpp"
#include "wglasso/metrics.hpp"
#include "wglasso/solver.hpp"
#include "wglasso/weighting.hpp"

namespace {

using namespace wgl;

struct Desk {
  LeadField lead_field;
  Vector data;
};

const Desk& desk() {
  static const Desk d = [] {
    ExperimentConfig config;
    const auto setup = build_experiment_setup(config, 42);
    Desk out{build_lead_field(setup.inverse), {}};
    const auto sources = draw_trial_sources(config, setup, 7);
    out.data = simulate_measurement(build_lead_field(setup.truth), sources, 0.01, 8).noisy;
    return out;
  }();
  return d;
}

ProblemInstance desk_problem(WeightingKind kind) {
  const auto& d = desk();
  const Matrix& A = d.lead_field.entries;
  const auto B = kind == WeightingKind::kIdentity ? identity_weighting(A.rows())
                                                  : truncated_pseudoinverse(A, default_truncation_rank(A.rows()));
  return compose_problem(A, B, d.data, make_dipole_groups(A.cols() / 3));
}

void BM_BuildLeadField(benchmark::State& state) {
  ExperimentConfig config;
  config.electrodes = static_cast<int>(state.range(0));
  const auto setup = build_experiment_setup(config, 42);
  for (auto _ : state) benchmark::DoNotOptimize(build_lead_field(setup.inverse));
}
BENCHMARK(BM_BuildLeadField)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_ComposeProblem(benchmark::State& state) {
  const auto kind = static_cast<WeightingKind>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(desk_problem(kind));
}
BENCHMARK(BM_ComposeProblem)
    ->Arg(static_cast<int>(WeightingKind::kIdentity))
    ->Arg(static_cast<int>(WeightingKind::kTruncatedPseudoinverse))
    ->Unit(benchmark::kMillisecond);

void BM_GroupUpdate(benchmark::State& state) {
  const auto p = desk_problem(WeightingKind::kTruncatedPseudoinverse);
  const Vector r = p.rhs();
  const double alpha = 0.1 * alpha_max(p);
  Index g = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(group_update(p, g, r, alpha));
    g = (g + 1) % p.groups().size();
  }
}
BENCHMARK(BM_GroupUpdate);

// range(1): alpha as a fraction of alpha_max, in thousandths
void BM_BcdSolve(benchmark::State& state) {
  const auto p = desk_problem(static_cast<WeightingKind>(state.range(0)));
  const double alpha = 1e-3 * static_cast<double>(state.range(1)) * alpha_max(p);
  const Vector x0 = Vector::Zero(p.cols());
  int sweeps = 0;
  for (auto _ : state) {
    const auto r = bcd_solve(p, alpha, x0);
    sweeps = r.iterations;
    benchmark::DoNotOptimize(r.x.data());
  }
  state.counters["sweeps"] = sweeps;
}
BENCHMARK(BM_BcdSolve)
    ->ArgsProduct({{static_cast<int>(WeightingKind::kIdentity), static_cast<int>(WeightingKind::kTruncatedPseudoinverse)},
                   {500, 100, 20}})
    ->Unit(benchmark::kMillisecond);

void BM_MorozovSelect(benchmark::State& state) {
  const auto p = desk_problem(static_cast<WeightingKind>(state.range(0)));
  const double delta = 0.01 * p.original_data().norm();
  for (auto _ : state) benchmark::DoNotOptimize(morozov_select_alpha(p, delta));
}
BENCHMARK(BM_MorozovSelect)
    ->Arg(static_cast<int>(WeightingKind::kIdentity))
    ->Arg(static_cast<int>(WeightingKind::kTruncatedPseudoinverse))
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
