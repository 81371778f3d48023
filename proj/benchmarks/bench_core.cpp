/*
 * Copyright 2026 The GL-AT Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "glat/autodiff.hpp"
#include "glat/corpus.hpp"
#include "glat/features.hpp"
#include "glat/metrics.hpp"
#include "glat/trainer.hpp"

using namespace glat;

namespace {

ad::Tensor<float> random_tensor(ad::Shape shape, std::mt19937_64& rng) {
  ad::Tensor<float> t(std::move(shape));
  std::normal_distribution<float> n(0.0f, 1.0f);
  for (auto& v : t.values) v = n(rng);
  return t;
}

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const auto cin = static_cast<std::size_t>(state.range(0));
  const auto cout = static_cast<std::size_t>(state.range(1));
  std::mt19937_64 rng(1);
  const auto x = random_tensor({cin, 250, 32}, rng);
  const auto w = random_tensor({cout, cin, 3, 3}, rng);
  const auto b = random_tensor({cout}, rng);
  for (auto _ : state) {
    ad::Graph<float> g;
    auto xv = g.leaf(x);
    auto y = ad::conv2d(xv, g.leaf(w), g.leaf(b));
    g.backward(ad::sum(y));
    benchmark::DoNotOptimize(g.grad(xv).data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cin * cout * 250 * 32 * 9));
}
BENCHMARK(BM_Conv2dForwardBackward)->Args({1, 16})->Args({16, 32})->Args({32, 64})->Unit(benchmark::kMillisecond);

void BM_LogMel(benchmark::State& state) {
  FrontendConfig config;
  config.hop_samples = static_cast<int>(state.range(0));
  const LogMelFrontend frontend(config);
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples.resize(160000);
  std::mt19937_64 rng(2);
  std::normal_distribution<float> n(0.0f, 0.1f);
  for (auto& s : clip.samples) s = n(rng);
  for (auto _ : state) benchmark::DoNotOptimize(frontend.compute(clip).frames.values.data());
}
BENCHMARK(BM_LogMel)->Arg(160)->Arg(320)->Unit(benchmark::kMillisecond);

void BM_AveragePrecision(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u;
  std::vector<double> scores(n);
  std::vector<std::uint8_t> targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = u(rng);
    targets[i] = u(rng) < 0.3 ? 1 : 0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(average_precision(scores, targets));
}
BENCHMARK(BM_AveragePrecision)->Arg(100)->Arg(10000);

void BM_TrainStep(benchmark::State& state) {
  const bool glat_mode = state.range(0) != 0;
  CorpusConfig cc;
  cc.num_train_clips = 16;
  cc.num_eval_clips = 1;
  const auto corpus = generate_synthetic_corpus(cc, 4);
  PipelineConfig config;
  config.frontend.hop_samples = 320;
  config.frontend.mel_bins = 32;
  config.model.channels = {8, 16, 32, 32};
  config.num_clips = 3;
  config.window_seconds = 1.0;
  config.trainer.batch_size = 16;
  config.trainer.mode = glat_mode ? TrainMode::glat : TrainMode::baseline;
  const LogMelFrontend frontend(config.frontend);
  const auto train = Dataset::from_corpus(corpus, Split::train, frontend);
  TwoStreamModel<float> model(config.model, glat_mode, 0);
  Trainer<float> trainer(config, model, train);
  std::int64_t it = 0;
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step(it++).total);
  state.SetItemsProcessed(state.iterations() * config.trainer.batch_size);
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
