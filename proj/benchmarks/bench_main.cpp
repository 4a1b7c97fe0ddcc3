#include <benchmark/benchmark.h>

#include "qcal/detectors.hpp"
#include "qcal/quorum.hpp"
#include "qcal/recon_avg.hpp"
#include "qcal/recon_ml.hpp"
#include "qcal/sampler.hpp"
#include "qcal/states.hpp"

using namespace qcal;

namespace {

struct Fixture {
  TwinBeam tb = twin_beam(0.88, 60);
  Povm povm = noisy_photocounter(0.8, 1.0, 60, 40);
  HomodyneQuorum hq = make_homodyne_quorum(0.9, 20);
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

static void BM_KernelBuild(benchmark::State& state) {
  const int cutoff = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(make_homodyne_quorum(0.9, cutoff));
}
BENCHMARK(BM_KernelBuild)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

static void BM_HomodyneSampler(benchmark::State& state) {
  const auto& f = fixture();
  const auto n = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_homodyne_twinbeam(f.tb, f.povm, f.hq, n, ++seed));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_HomodyneSampler)->Arg(100000)->Unit(benchmark::kMillisecond);

static void BM_Averaging(benchmark::State& state) {
  const auto& f = fixture();
  const auto data = sample_homodyne_twinbeam(f.tb, f.povm, f.hq, static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_conditioned_homodyne(data, f.hq, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Averaging)->Arg(200000)->Unit(benchmark::kMillisecond);

static void BM_LikelihoodPass(benchmark::State& state) {
  const auto& f = fixture();
  const auto data = sample_homodyne_twinbeam(f.tb, f.povm, f.hq, static_cast<std::size_t>(state.range(0)), 2);
  const auto problem = build_problem_diagonal(data, f.tb, f.hq, 40);
  const RealMatrix theta = RealMatrix::Constant(static_cast<Index>(problem.outcomes.size()) + 1, 41,
                                                1.0 / static_cast<double>(problem.outcomes.size() + 1));
  for (auto _ : state) benchmark::DoNotOptimize(log_likelihood(problem, theta));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LikelihoodPass)->Arg(50000)->Unit(benchmark::kMillisecond);

static void BM_MlFit(benchmark::State& state) {
  const auto& f = fixture();
  const auto data = sample_homodyne_twinbeam(f.tb, f.povm, f.hq, 50000, 3);
  const auto problem = build_problem_diagonal(data, f.tb, f.hq, 40);
  for (auto _ : state) benchmark::DoNotOptimize(maximize(problem));
}
BENCHMARK(BM_MlFit)->Unit(benchmark::kSecond)->Iterations(1);

BENCHMARK_MAIN();
