// Serial reference vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>

#include "egomind/reward_batch.hpp"
#include "egomind/simulator.hpp"

using namespace egomind;

namespace {

std::vector<reward::RolloutGroup> make_groups(int n, int G, int tokens) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<reward::RolloutGroup> groups(static_cast<std::size_t>(n));
  for (auto& g : groups) {
    g.question_id = "q";
    g.epsilon = 0.2;
    g.beta = 1e-4;
    for (int i = 0; i < G; ++i) {
      reward::Rollout r;
      r.reward = u(rng);
      for (int t = 0; t < tokens; ++t) {
        const double p = -3.0 * u(rng);
        r.policy_logprobs.push_back(p);
        r.old_logprobs.push_back(p - 0.01 * u(rng));
        r.ref_logprobs.push_back(p - 0.2 * u(rng));
      }
      g.rollouts.push_back(std::move(r));
    }
  }
  return groups;
}

void BM_AuditSerial(benchmark::State& state) {
  const auto groups = make_groups(static_cast<int>(state.range(0)), 16, 256);
  for (auto _ : state) benchmark::DoNotOptimize(reward::audit_groups_serial(groups));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_AuditParallel(benchmark::State& state) {
  const auto groups = make_groups(static_cast<int>(state.range(0)), 16, 256);
  for (auto _ : state) benchmark::DoNotOptimize(reward::audit_groups(groups));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

std::pair<std::vector<double>, std::vector<double>> make_pairs(std::size_t n) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.1, 100.0);
  std::vector<double> p(n), t(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = u(rng);
    p[i] = t[i] * (0.5 + u(rng) / 100.0);
  }
  return {p, t};
}

void BM_MraSerial(benchmark::State& state) {
  const auto [p, t] = make_pairs(static_cast<std::size_t>(state.range(0)));
  const auto th = reward::default_mra_thresholds();
  for (auto _ : state) benchmark::DoNotOptimize(reward::mra_batch_serial(p, t, th));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_MraParallel(benchmark::State& state) {
  const auto [p, t] = make_pairs(static_cast<std::size_t>(state.range(0)));
  const auto th = reward::default_mra_thresholds();
  for (auto _ : state) benchmark::DoNotOptimize(reward::mra_batch(p, t, th));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SimulateSerial(benchmark::State& state) {
  sim::SceneConfig sc;
  for (auto _ : state)
    benchmark::DoNotOptimize(sim::simulate_batch_serial(1, static_cast<int>(state.range(0)), 8, 16, sc));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SimulateParallel(benchmark::State& state) {
  sim::SceneConfig sc;
  for (auto _ : state)
    benchmark::DoNotOptimize(sim::simulate_batch(1, static_cast<int>(state.range(0)), 8, 16, sc));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_AuditSerial)->Arg(256)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AuditParallel)->Arg(256)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MraSerial)->Arg(1 << 16)->Arg(1 << 20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MraParallel)->Arg(1 << 16)->Arg(1 << 20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateSerial)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateParallel)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
