#include <benchmark/benchmark.h>

#include <filesystem>

#include "evcoord/runner.hpp"

using namespace evcoord;

namespace {

const Scenario& congested() {
  static const Scenario s =
      Scenario::load(std::filesystem::path(EVCOORD_SCENARIO_DIR) / "congested" / "scenario.json");
  return s;
}

void BM_LocalSolve(benchmark::State& state) {
  const auto& sc = congested();
  const auto c = sc.network.equilibrated();
  const int m = c.rows();
  const Eigen::VectorXd nu = Eigen::VectorXd::Constant(m, 0.01);
  const Eigen::VectorXd sum = Eigen::VectorXd::Constant(m, -0.02);
  const auto qp = make_local_qp(sc.polytopes[0], c, 0, sc.fleet[0], sc.price, sc.config.step_hours, nu, sum, 10.0, 3);
  for (auto _ : state) benchmark::DoNotOptimize(solve(qp));
}
BENCHMARK(BM_LocalSolve);

void BM_Centralized(benchmark::State& state) {
  const auto& sc = congested();
  for (auto _ : state) benchmark::DoNotOptimize(solve_centralized(sc, CaseKind::network_aware));
}
BENCHMARK(BM_Centralized)->Unit(benchmark::kMillisecond);

void BM_DistributedRounds(benchmark::State& state) {
  const auto& sc = congested();
  auto o = run_options(sc.config);
  o.admm.max_iter = static_cast<int>(state.range(0));
  o.admm.threads = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(run_distributed(sc, o));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DistributedRounds)->Args({50, 1})->Args({50, 4})->Unit(benchmark::kMillisecond);

void BM_SampleRound(benchmark::State& state) {
  const auto& g = congested().graph;
  FailureProcess p(g, FailureModel::uniform(g, 0.5, 0.5, 1));
  for (auto _ : state) benchmark::DoNotOptimize(p.sample_round());
}
BENCHMARK(BM_SampleRound);

}  // namespace
BENCHMARK_MAIN();
