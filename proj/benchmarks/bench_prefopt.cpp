#include <benchmark/benchmark.h>

#include "guiseprobe/prefopt.hpp"

namespace {

std::vector<gp::PreferenceExample> bench_prefs(std::size_t n) {
  std::vector<gp::PreferenceExample> prefs;
  for (std::size_t i = 0; i < n; ++i) {
    prefs.push_back({"t" + std::to_string(i % 13), "t1 t2 t3", "t4 t5"});
  }
  return prefs;
}

void BM_dpo_step(benchmark::State& state) {
  gp::ToyPolicyParams params = gp::ToyPolicyParams::random(24, 1, 7);
  gp::ToyPolicyParams ref = params;
  auto prefs = bench_prefs(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(gp::dpo_loss_and_grad(params, ref, prefs, 0.3));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_dpo_step)->Arg(4)->Arg(32);

void BM_orpo_step(benchmark::State& state) {
  gp::ToyPolicyParams params = gp::ToyPolicyParams::random(24, 1, 8);
  auto prefs = bench_prefs(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(gp::orpo_loss_and_grad(params, prefs));
  }
}
BENCHMARK(BM_orpo_step)->Arg(4)->Arg(32);

void BM_sft_step(benchmark::State& state) {
  gp::ToyPolicyParams params = gp::ToyPolicyParams::random(24, 1, 9);
  std::vector<gp::SftExample> batch;
  for (int i = 0; i < 16; ++i) batch.push_back({"t0 t1", "t2 t3 t4"});
  for (auto _ : state) {
    benchmark::DoNotOptimize(gp::sft_loss_and_grad(params, batch));
  }
}
BENCHMARK(BM_sft_step);

void BM_rloo_step(benchmark::State& state) {
  gp::ToyPolicyParams params = gp::ToyPolicyParams::random(24, 1, 10);
  gp::ToyPolicyParams ref = params;
  gp::LengthReward reward;
  std::mt19937_64 rng(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gp::rloo_gradient(
        params, ref, reward, "t0 t1", static_cast<int>(state.range(0)), 0.1,
        rng, 8));
  }
}
BENCHMARK(BM_rloo_step)->Arg(2)->Arg(8);

}  // namespace

BENCHMARK_MAIN();
