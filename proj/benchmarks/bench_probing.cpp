#include <benchmark/benchmark.h>

#include <cmath>

#include "guiseprobe/corpus.hpp"
#include "guiseprobe/probing.hpp"
#include "guiseprobe/toy_policy.hpp"

namespace {

gp::ToyPolicyParams bench_params() {
  return gp::ToyPolicyParams::random(32, 1, 42);
}

gp::MatchedCorpus bench_corpus(std::size_t pairs) {
  gp::MatchedCorpus corpus;
  for (std::size_t i = 0; i < pairs; ++i) {
    corpus.pairs.push_back({"t" + std::to_string(i % 29) + " t1 t2",
                            "t" + std::to_string((i + 7) % 29) + " t3 t4"});
  }
  return corpus;
}

void BM_toy_score(benchmark::State& state) {
  gp::ToyProvider provider(bench_params());
  gp::ScoringRequest request{"t0 t1 t2 t3", " t4 t5"};
  for (auto _ : state) {
    benchmark::DoNotOptimize(provider.score(request).total_logprob);
  }
}
BENCHMARK(BM_toy_score);

void BM_matched_format_score(benchmark::State& state) {
  gp::ToyProvider provider(bench_params());
  gp::MatchedCorpus corpus = bench_corpus(static_cast<std::size_t>(state.range(0)));
  gp::PromptFormat format{"f", "The person says: {x} The person is"};
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        gp::matched_format_score(provider, format, corpus, "t5"));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_matched_format_score)->Arg(8)->Arg(64);

void BM_run_probe(benchmark::State& state) {
  gp::ToyProvider provider(bench_params());
  gp::ProbeConfig config;
  config.setting = gp::ProbeSetting::matched;
  config.matched = bench_corpus(16);
  config.formats =
      gp::builtin_prompt_formats(gp::AttributeKind::trait,
                                 gp::FormatSetting::covert);
  config.attributes.kind = gp::AttributeKind::trait;
  for (int i = 0; i < 8; ++i) {
    config.attributes.attributes.push_back(
        {"t" + std::to_string(i), 0.0, gp::AttributeKind::trait});
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(gp::run_probe(provider, config));
  }
}
BENCHMARK(BM_run_probe);

}  // namespace

BENCHMARK_MAIN();
