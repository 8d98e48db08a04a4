#include <benchmark/benchmark.h>

#include "attnlab/cache.hpp"
#include "attnlab/latent.hpp"
#include "attnlab/matrix.hpp"
#include "attnlab/multihead.hpp"
#include "attnlab/random.hpp"
#include "attnlab/svd.hpp"

using namespace attnlab;

static void BM_Matmul(benchmark::State& state) {
  const std::size_t n = state.range(0);
  Rng rng = make_rng(1);
  const Matrix a = gaussian_matrix(n, n, rng);
  const Matrix b = gaussian_matrix(n, n, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(matmul(a, b));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(16, 256)->Complexity();

static void BM_RowSoftmax(benchmark::State& state) {
  const std::size_t n = state.range(0);
  Rng rng = make_rng(2);
  const Matrix logits = gaussian_matrix(n, n, rng, 3.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(row_softmax(logits));
  }
}
BENCHMARK(BM_RowSoftmax)->RangeMultiplier(2)->Range(16, 256);

static void BM_MhaForward(benchmark::State& state) {
  const std::size_t tokens = state.range(0);
  const MhaSpec spec(8, 8, 64, 8, 8, 64);
  const MhaWeights w = random_mha_weights(spec, 3);
  Rng rng = make_rng(4);
  const Matrix x = gaussian_matrix(tokens, 64, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(self_attention(x, w, spec, MaskPolicy::causal()));
  }
  state.SetComplexityN(tokens);
}
BENCHMARK(BM_MhaForward)->RangeMultiplier(2)->Range(8, 128)->Complexity();

static void BM_GqaForward(benchmark::State& state) {
  const std::size_t tokens = state.range(0);
  const MhaSpec spec(8, 2, 64, 8, 8, 64);
  const MhaWeights w = random_mha_weights(spec, 5);
  Rng rng = make_rng(6);
  const Matrix x = gaussian_matrix(tokens, 64, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(self_attention(x, w, spec, MaskPolicy::causal()));
  }
}
BENCHMARK(BM_GqaForward)->RangeMultiplier(2)->Range(8, 128);

static void BM_MlaForwardMerged(benchmark::State& state) {
  const std::size_t tokens = state.range(0);
  const MlaSpec spec(8, 64, 16, 16, 8, 64);
  const MergedMlaWeights w = merge_weights(random_mla_weights(spec, 7));
  Rng rng = make_rng(8);
  const Matrix x = gaussian_matrix(tokens, 64, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mla_forward(x, w, spec, MaskPolicy::causal()));
  }
}
BENCHMARK(BM_MlaForwardMerged)->RangeMultiplier(2)->Range(8, 128);

// One decode step against an already-filled cache of `range` tokens.
static void BM_StreamingDecodeStep(benchmark::State& state) {
  const std::size_t context = state.range(0);
  const MhaSpec spec(8, 2, 64, 8, 8, 64);
  const MhaWeights w = random_mha_weights(spec, 9);
  Rng rng = make_rng(10);
  const Matrix history = gaussian_matrix(context, 64, rng);
  const Matrix token = gaussian_matrix(1, 64, rng);
  for (auto _ : state) {
    state.PauseTiming();
    KvCache cache(spec);
    cache.append(history, w);
    state.ResumeTiming();
    benchmark::DoNotOptimize(streaming_decode_step(cache, token, w, spec));
  }
}
BENCHMARK(BM_StreamingDecodeStep)->RangeMultiplier(4)->Range(16, 256);

static void BM_TruncatedSvd(benchmark::State& state) {
  const std::size_t n = state.range(0);
  Rng rng = make_rng(11);
  const Matrix m = gaussian_matrix(n, n, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(truncated_svd(m, n / 2));
  }
}
BENCHMARK(BM_TruncatedSvd)->RangeMultiplier(2)->Range(8, 64);

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
