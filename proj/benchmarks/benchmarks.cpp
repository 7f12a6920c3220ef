// Microbenchmarks for the hot paths: the convolution kernels, whole-model
// inference and training steps, and the audio front end.
#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "ncae/dsp.hpp"
#include "ncae/eval.hpp"
#include "ncae/layers.hpp"
#include "ncae/model.hpp"
#include "ncae/rng.hpp"
#include "ncae/training.hpp"

namespace {

using namespace ncae;

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.uniform(0.0, 1.0);
  return t;
}

std::vector<MfccSequence> random_sequences(std::size_t n, std::size_t s,
                                           std::size_t d, Rng& rng) {
  std::vector<MfccSequence> out(n);
  for (auto& seq : out) {
    seq.rows = s;
    seq.cols = d;
    seq.data.resize(s * d);
    for (double& v : seq.data) v = rng.uniform(-3.0, 4.0);
  }
  return out;
}

AudioBuffer noise_audio(double seconds, int sample_rate, Rng& rng) {
  AudioBuffer a;
  a.sample_rate = sample_rate;
  a.samples.resize(static_cast<std::size_t>(seconds * sample_rate));
  for (double& v : a.samples) v = rng.uniform(-0.5, 0.5);
  return a;
}

void BM_Conv1dForward(benchmark::State& state) {
  const std::size_t kernel = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Conv1dLayer layer(128, 128, kernel);
  layer.init_xavier(rng);
  const Tensor x = random_tensor({1, 128, 30}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv1d_forward(x, layer));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Conv1dForward)->Arg(3)->Arg(5)->Arg(7);

void BM_Conv1dBackward(benchmark::State& state) {
  const std::size_t kernel = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  Conv1dLayer layer(128, 128, kernel);
  layer.init_xavier(rng);
  const Tensor x = random_tensor({1, 128, 30}, rng);
  const Tensor g = random_tensor({1, 128, 30}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv1d_backward(g, x, layer));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Conv1dBackward)->Arg(3)->Arg(5)->Arg(7);

void BM_NcaeReconstruct(benchmark::State& state) {
  const std::size_t kernel = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  NcaeModel model(30, 128, kernel);
  model.init_xavier(rng);
  const Tensor x = random_tensor({1, 30, 128}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(model.reconstruct(x));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_NcaeReconstruct)->Arg(3)->Arg(5)->Arg(7);

void BM_BottleneckReconstruct(benchmark::State& state) {
  Rng rng(4);
  BottleneckAeModel model(30, 128, 3);
  model.init_xavier(rng);
  const Tensor x = random_tensor({1, 30, 128}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(model.reconstruct(x));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_BottleneckReconstruct);

void BM_TrainEpoch(benchmark::State& state) {
  Rng rng(5);
  auto seqs = random_sequences(16, 30, 128, rng);
  TrainConfig cfg;
  cfg.max_epochs = 1;
  cfg.patience = 1;
  for (auto _ : state) {
    NcaeModel model(30, 128, 3);
    benchmark::DoNotOptimize(train(model, seqs, cfg));
  }
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

void BM_Stft(benchmark::State& state) {
  Rng rng(6);
  PreprocessConfig pp;
  std::vector<double> segment(pp.segment_samples());
  for (double& v : segment) v = rng.uniform(-0.5, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(stft(segment, pp));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Stft);

void BM_MelSpectra(benchmark::State& state) {
  Rng rng(7);
  PreprocessConfig pp;
  std::vector<double> segment(pp.segment_samples());
  for (double& v : segment) v = rng.uniform(-0.5, 0.5);
  const Spectrogram spec = stft(segment, pp);
  const MelFilterbank fb = build_mel_filterbank(pp);
  for (auto _ : state) benchmark::DoNotOptimize(mel_spectra(spec, fb, pp));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_MelSpectra);

void BM_FrontEnd(benchmark::State& state) {
  Rng rng(8);
  PreprocessConfig pp;
  const AudioBuffer audio = noise_audio(10.0, pp.sample_rate, rng);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        sequences_from_audio(audio, pp, StackMode::kTumbling, "bench"));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_FrontEnd)->Unit(benchmark::kMillisecond);

void BM_ScoreSequence(benchmark::State& state) {
  Rng rng(9);
  NcaeModel model(30, 128, 3);
  model.init_xavier(rng);
  auto seqs = random_sequences(1, 30, 128, rng);
  model.norm_stats = NormStats::fit(seqs);
  for (auto _ : state)
    benchmark::DoNotOptimize(score_sequence(model, seqs[0]));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ScoreSequence);

}  // namespace

BENCHMARK_MAIN();
