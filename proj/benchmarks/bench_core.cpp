// Microbenchmarks for the hot paths: convolution, generator forward/backward,
// and verification metrics. Sizes mirror desk-scale training (64x64 images).

#include <benchmark/benchmark.h>

#include <random>

#include "cpgan/evaluation.hpp"
#include "cpgan/networks.hpp"
#include "cpgan/nn.hpp"
#include "cpgan/rng.hpp"

using namespace cpgan;

namespace {

Tensor<float> random_input(int n, int c, int h, int w, std::uint64_t seed) {
  Tensor<float> t({n, c, h, w});
  std::mt19937_64 rng = make_rng(seed, "bench");
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = u(rng);
  return t;
}

void BM_ConvForward(benchmark::State& state) {
  Conv2d<float> conv("bench_conv", 32, 32, 3, 1);
  std::vector<Param<float>*> ps;
  conv.params(ps);
  init_params(ps, 7);
  Tensor<float> x = random_input(4, 32, 32, 32, 11);
  for (auto _ : state) {
    Tensor<float> y = conv.forward(x);
    benchmark::DoNotOptimize(y.data());
  }
}

void BM_ConvBackward(benchmark::State& state) {
  Conv2d<float> conv("bench_conv", 32, 32, 3, 1);
  std::vector<Param<float>*> ps;
  conv.params(ps);
  init_params(ps, 7);
  Tensor<float> x = random_input(4, 32, 32, 32, 11);
  Tensor<float> y = conv.forward(x);
  Tensor<float> gy = random_input(y.dim(0), y.dim(1), y.dim(2), y.dim(3), 13);
  for (auto _ : state) {
    Tensor<float> gx = conv.backward(gy);
    benchmark::DoNotOptimize(gx.data());
  }
}

void BM_GeneratorForward(benchmark::State& state) {
  NetConfig net;
  UNetGenerator<float> g("enc_b", "dec_b", net);
  std::vector<Param<float>*> ps;
  g.params(ps);
  init_params(ps, 7);
  Tensor<float> x = random_input(static_cast<int>(state.range(0)), net.channels, net.image_size,
                                 net.image_size, 11);
  for (auto _ : state) {
    auto out = g.forward(x);
    benchmark::DoNotOptimize(out.reconstruction.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_VerificationMetrics(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gen(-1.0, 0.5), imp(-2.0, 0.7);
  ScoreSet scores;
  for (int i = 0; i < state.range(0); ++i) {
    scores.genuine.push_back(gen(rng));
    scores.impostor.push_back(imp(rng));
  }
  for (auto _ : state) {
    MetricsReport r = compute_verification(scores);
    benchmark::DoNotOptimize(r.auc);
  }
}

}  // namespace

BENCHMARK(BM_ConvForward)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackward)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GeneratorForward)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_VerificationMetrics)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
