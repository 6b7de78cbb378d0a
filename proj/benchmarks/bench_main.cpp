#include <array>

#include <benchmark/benchmark.h>

#include "dropforge/attack.hpp"
#include "dropforge/dataset.hpp"
#include "dropforge/defense.hpp"
#include "dropforge/freq.hpp"
#include "dropforge/nn.hpp"
#include "dropforge/quant.hpp"
#include "dropforge/rng.hpp"

using namespace dropforge;

namespace {

const Dataset& corpus() {
  static const Dataset ds = synth_dataset(10, 2, 32, 1);
  return ds;
}

const ConvNet& net() {
  static const ConvNet m = ConvNet::make_default(3, 32, 10, 1);
  return m;
}

void BM_Dct8x8(benchmark::State& state) {
  RngStream rng(1, 0);
  std::array<double, kBlockArea> in{}, out{};
  for (auto& v : in) v = rng.uniform(-128.0, 127.0);
  for (auto _ : state) {
    dct8x8(in, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Dct8x8);

void BM_ImageDctRoundTrip(benchmark::State& state) {
  const Image& img = corpus().images[0];
  for (auto _ : state) benchmark::DoNotOptimize(merge_blocks(idct2(dct2(split_blocks(img)))));
}
BENCHMARK(BM_ImageDctRoundTrip);

void BM_QuantizeDiff(benchmark::State& state) {
  double c = -700.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(quantize_diff(c, 17, 0.1));
    c = c > 700.0 ? -700.0 : c + 0.37;
  }
}
BENCHMARK(BM_QuantizeDiff);

void BM_Forward(benchmark::State& state) {
  const Tensor3 x = to_tensor(corpus().images[0]);
  for (auto _ : state) benchmark::DoNotOptimize(net().forward(x));
}
BENCHMARK(BM_Forward);

void BM_InputGradient(benchmark::State& state) {
  const Tensor3 x = to_tensor(corpus().images[0]);
  for (auto _ : state) benchmark::DoNotOptimize(net().loss_and_input_grad(x, 3, LossMode::kUntargeted));
}
BENCHMARK(BM_InputGradient);

// Per-step cost: no early exit, so every run takes exactly `steps` steps.
void BM_AdvDrop(benchmark::State& state) {
  AdvDropConfig cfg;
  cfg.steps = static_cast<int>(state.range(0));
  cfg.early_exit = false;
  const Image& img = corpus().images[1];
  for (auto _ : state) benchmark::DoNotOptimize(advdrop(net(), img, corpus().labels[1], cfg));
  state.SetItemsProcessed(state.iterations() * cfg.steps);
}
BENCHMARK(BM_AdvDrop)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_JpegRoundTrip(benchmark::State& state) {
  const Image& img = corpus().images[2];
  for (auto _ : state) benchmark::DoNotOptimize(jpeg_roundtrip(img, 75));
}
BENCHMARK(BM_JpegRoundTrip);

}  // namespace

BENCHMARK_MAIN();
