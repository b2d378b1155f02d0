#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "ipursuit/answers.hpp"
#include "ipursuit/exactip.hpp"
#include "ipursuit/metrics.hpp"
#include "ipursuit/pursuit.hpp"
#include "ipursuit/querybank.hpp"
#include "ipursuit/rng.hpp"
#include "ipursuit/vip.hpp"

using namespace ipursuit;

namespace {

EmbeddingTable random_embeddings(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<float> data(n * dim);
  for (float& v : data) v = static_cast<float>(gauss(rng));
  return EmbeddingTable(n, dim, std::move(data));
}

void BM_KmeansCluster(benchmark::State& state) {
  const EmbeddingTable table = random_embeddings(2000, 128, 7);
  const std::size_t k = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    const ClusteringResult result = kmeans_cluster(table, k, 42, 10);
    benchmark::DoNotOptimize(result.inertia);
  }
}
BENCHMARK(BM_KmeansCluster)->Arg(16)->Arg(64);

void BM_ConditionalMiScan(benchmark::State& state) {
  const SyntheticSpec spec = make_random_spec(16, 0.5, 3, 2.0);
  const auto [answers, labels] = synth_generate(spec, 5000);
  const TaskData data(answers, labels.task_column(0));
  History history;
  history.push(0, answers.at(0, 0));
  history.push(5, answers.at(0, 5));
  const std::vector<bool> asked{true,  false, false, false, false, true,  false, false,
                                false, false, false, false, false, false, false, false};
  for (auto _ : state) {
    const auto selection = ip_select_next(data, history, asked, 0.5);
    benchmark::DoNotOptimize(selection);
  }
}
BENCHMARK(BM_ConditionalMiScan);

void BM_MlpForwardBackward(benchmark::State& state) {
  const std::size_t width = static_cast<std::size_t>(state.range(0));
  const MlpParams<float> params =
      MlpParams<float>::he_uniform({40, width, width, width, width, 20}, 11);
  std::vector<float> input(40);
  std::mt19937_64 rng(5);
  for (float& v : input) v = static_cast<float>(u64_to_unit(rng()) - 0.5);
  std::vector<float> out_grad(20, 0.05f);
  MlpGrads<float> grads = MlpGrads<float>::zeros_like(params);
  for (auto _ : state) {
    ForwardCache<float> cache;
    const std::vector<float> out = mlp_forward<float>(params, input, &cache);
    benchmark::DoNotOptimize(out);
    mlp_backward_accum<float>(params, cache, out_grad, grads);
    benchmark::DoNotOptimize(grads.input);
  }
}
BENCHMARK(BM_MlpForwardBackward)->Arg(128)->Arg(512);

void BM_PursueOneReport(benchmark::State& state) {
  const SyntheticSpec spec = make_random_spec(64, 0.5, 17, 2.0);
  const auto [answers, labels] = synth_generate(spec, 64);
  MatrixAnswerProvider provider(answers);
  PursuitModel model;
  model.n_queries = 64;
  model.querier = MlpParams<float>::he_uniform({128, 128, 64}, 3);
  model.classifier = MlpParams<float>::he_uniform({128, 128, 1}, 4);
  StopRule rule;
  rule.confidence_threshold = 1.0;  // force full exhaustion
  rule.max_queries = 64;
  std::size_t row = 0;
  for (auto _ : state) {
    const PursuitTrace trace = pursue(model, provider, row, "", rule);
    benchmark::DoNotOptimize(trace.final_posterior);
    row = (row + 1) % answers.n_reports();
  }
}
BENCHMARK(BM_PursueOneReport);

void BM_AveragePrecision(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(23);
  std::vector<double> scores(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = u64_to_unit(rng());
    labels[i] = static_cast<int>(rng() % 2);
  }
  labels[0] = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(average_precision(scores, labels));
  }
}
BENCHMARK(BM_AveragePrecision)->Arg(1000)->Arg(100000);

void BM_SynthGenerate(benchmark::State& state) {
  const SyntheticSpec spec = make_random_spec(520, 0.3, 29, 2.0);
  for (auto _ : state) {
    const auto [answers, labels] = synth_generate(spec, 1000);
    benchmark::DoNotOptimize(answers.values().data());
  }
}
BENCHMARK(BM_SynthGenerate);

}  // namespace

BENCHMARK_MAIN();
