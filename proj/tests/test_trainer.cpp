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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "glat/checkpoint.hpp"
#include "glat/errors.hpp"
#include "glat/trainer.hpp"
#include "support/tiny_pipeline.hpp"

using namespace glat;
using oracle::tiny_corpus_config;
using oracle::tiny_pipeline_config;

namespace {

struct TinyData {
  PipelineConfig config = tiny_pipeline_config();
  SyntheticCorpus corpus = generate_synthetic_corpus(tiny_corpus_config(), 21);
  LogMelFrontend frontend{config.frontend};
  Dataset train = Dataset::from_corpus(corpus, Split::train, frontend);
  Dataset eval = Dataset::from_corpus(corpus, Split::eval, frontend);
};

const TinyData& tiny() {
  static const TinyData data;
  return data;
}

std::vector<LossReport> run_steps(PipelineConfig config, int steps, int threads = 1) {
  config.trainer.threads = threads;
  TwoStreamModel<float> model(config.model, config.trainer.mode == TrainMode::glat, config.trainer.seed);
  Trainer<float> trainer(config, model, tiny().train);
  std::vector<LossReport> out;
  for (int i = 0; i < steps; ++i) out.push_back(trainer.step(i));
  return out;
}

}  // namespace

TEST(AggregateLocal, Examples) {
  FrameMatrix single(1, 3);
  single.values = {0.1, 0.5, 0.9};
  EXPECT_EQ(aggregate_local(single), single.values);
  FrameMatrix two(2, 1);
  two.values = {0.2, 0.8};
  EXPECT_DOUBLE_EQ(aggregate_local(two)[0], 0.65);
  EXPECT_THROW(aggregate_local(FrameMatrix(0, 3)), UsageError);

  ad::Graph<double> g;
  const auto v = aggregate_local(g.constant(ad::Tensor<double>({2, 1}, {0.2, 0.8})));
  EXPECT_DOUBLE_EQ(v.values()[0], 0.65);
  EXPECT_THROW(aggregate_local(g.constant(ad::Tensor<double>({0, 3}))), UsageError);
}

TEST(AggregateLocal, PermutationInvariantAndBounded) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 1 + rep % 6, l = 4;
    FrameMatrix m(n, l);
    for (auto& x : m.values) x = u(rng);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    FrameMatrix p(n, l);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < l; ++j) p(r, j) = m(order[r], j);
    }
    const auto a = aggregate_local(m);
    const auto b = aggregate_local(p);
    for (std::size_t j = 0; j < l; ++j) {
      EXPECT_NEAR(a[j], b[j], 1e-15);
      EXPECT_GE(a[j], 0.0);
      EXPECT_LE(a[j], 1.0);
    }
  }
}

TEST(Fusion, ExamplesAndMonotonicity) {
  const std::vector<double> same{0.1, 0.6, 0.95};
  EXPECT_EQ(fuse_predictions(same, same), same);
  const std::vector<double> g{0.4}, l{0.8};
  EXPECT_NEAR(fuse_predictions(g, l)[0], 0.7, 1e-15);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u;
  for (int i = 0; i < 1000; ++i) {
    const std::vector<double> a{u(rng)}, b{u(rng)};
    const std::vector<double> a_up{std::min(1.0, a[0] + 0.1 * u(rng))};
    const double f = fuse_predictions(a, b)[0];
    EXPECT_GE(fuse_predictions(a_up, b)[0], f);
    EXPECT_GE(fuse_predictions(b, a_up)[0], fuse_predictions(b, a)[0]);
    EXPECT_GE(f, std::min(a[0], b[0]));
    EXPECT_LE(f, std::max(a[0], b[0]));
  }
  EXPECT_THROW(fuse_predictions(g, same), ShapeError);
}

TEST(TwoStreamModel, GlobalInitDoesNotDependOnMode) {
  const auto config = tiny_pipeline_config();
  TwoStreamModel<float> base(config.model, false, 4);
  TwoStreamModel<float> glat(config.model, true, 4);
  EXPECT_FALSE(base.has_local());
  ASSERT_TRUE(glat.has_local());
  for (std::size_t i = 0; i < base.store().size(); ++i) {
    EXPECT_EQ(base.store()[i].name, glat.store()[i].name);
    EXPECT_EQ(base.store()[i].value.values, glat.store()[i].value.values);
  }
  EXPECT_EQ(glat.store().size(), 2 * base.store().size());
  const auto l0 = glat.store().index_of("local.F.conv0.weight");
  EXPECT_NE(glat.store()[l0].value.values, glat.store()[0].value.values);

  TwoStreamModel<float> rebound(glat.store(), config.model);
  EXPECT_TRUE(rebound.has_local());
  TwoStreamModel<float> rebound_base(base.store(), config.model);
  EXPECT_FALSE(rebound_base.has_local());
}

TEST(Loss, TotalIsExactSumAndLocalUsesWeakLabels) {
  const auto& d = tiny();
  TwoStreamModel<double> model(d.config.model, true, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& ex = d.train.examples[i];
    ad::Graph<double> g;
    const auto loss = two_stream_loss(g, model, ex, d.config, d.frontend);
    EXPECT_EQ(loss.total.item(), loss.global_loss.item() + loss.local_loss.item());
    double manual = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      const double p = std::clamp(loss.outputs.local_probs.values()[j], 1e-7, 1.0 - 1e-7);
      manual -= ex.labels[j] ? std::log(p) : std::log(1.0 - p);
    }
    EXPECT_NEAR(loss.local_loss.item(), manual, 1e-12);
    EXPECT_EQ(loss.outputs.windows.size(), 2u);
    EXPECT_EQ(loss.outputs.per_clip_probs.shape(), (ad::Shape{2, 4}));
  }
}

TEST(Loss, UntrainedNetworkIsNearLn2PerElement) {
  auto config = tiny_pipeline_config();
  const auto first = run_steps(config, 1).front();
  const double per_element = std::log(2.0);
  EXPECT_NEAR(first.global_loss / 4.0, per_element, 0.02 * per_element);
  EXPECT_NEAR(first.local_loss / 4.0, per_element, 0.02 * per_element);
  EXPECT_EQ(first.total, first.global_loss + first.local_loss);
}

TEST(Loss, FullTwoStreamGradientMatchesFiniteDifferences) {
  const auto& d = tiny();
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto config = d.config;
    config.num_clips = 1 + static_cast<int>(seed);
    TwoStreamModel<double> model(config.model, true, 100 + seed);
    const auto r = oracle::check_two_stream_gradients(model, d.train.examples[seed], config, 60, seed);
    EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << seed;
    EXPECT_EQ(r.checked, 60u);
    EXPECT_LE(4 * r.skipped, r.checked);
  }
}

TEST(Trainer, FiftyStepsAreReproducible) {
  auto config = tiny_pipeline_config();
  config.trainer.seed = 3;
  const auto a = run_steps(config, 50);
  const auto b = run_steps(config, 50);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].global_loss, b[i].global_loss) << i;
    ASSERT_EQ(a[i].local_loss, b[i].local_loss) << i;
  }
  EXPECT_LT(a.back().total, a.front().total);
}

TEST(Trainer, ThreadCountDoesNotChangeResults) {
  auto config = tiny_pipeline_config();
  const auto a = run_steps(config, 6, 1);
  const auto b = run_steps(config, 6, 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].global_loss, b[i].global_loss);
    EXPECT_EQ(a[i].local_loss, b[i].local_loss);
  }
}

TEST(Trainer, OneStepUpdatesEveryParameterGroupOfBothStreams) {
  auto config = tiny_pipeline_config();
  TwoStreamModel<float> model(config.model, true, 1);
  const auto before = model.store();
  Trainer<float> trainer(config, model, tiny().train);
  trainer.step(0);
  for (const char* name : {"global.F.conv0.weight", "global.C.fc2.weight", "local.F.conv0.weight",
                           "local.C.fc2.weight"}) {
    const auto i = model.store().index_of(name);
    EXPECT_NE(model.store()[i].value.values, before[i].value.values) << name;
    EXPECT_EQ(model.store()[i].step, 1);
  }
}

TEST(Trainer, BatchesArePermutationSlices) {
  auto config = tiny_pipeline_config();
  TwoStreamModel<float> model(config.model, true, 0);
  Trainer<float> trainer(config, model, tiny().train);
  std::vector<std::size_t> epoch;
  for (int it = 0; it < 3; ++it) {
    const auto b = trainer.batch_indices(it);
    EXPECT_EQ(b, trainer.batch_indices(it));
    epoch.insert(epoch.end(), b.begin(), b.end());
  }
  std::sort(epoch.begin(), epoch.end());
  std::vector<std::size_t> all(12);
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(epoch, all);
  config.trainer.seed = 1;
  Trainer<float> other(config, model, tiny().train);
  EXPECT_NE(other.batch_indices(0), trainer.batch_indices(0));
}

TEST(Trainer, ResumeFromCheckpointMatchesUninterruptedRun) {
  auto config = tiny_pipeline_config();
  config.trainer.iterations = 8;
  TwoStreamModel<float> full(config.model, true, 0);
  const auto straight = run_training(config, full, tiny().train, nullptr);

  auto half = config;
  half.trainer.iterations = 3;
  TwoStreamModel<float> first(config.model, true, 0);
  const auto part1 = run_training(half, first, tiny().train, nullptr);
  const auto path = std::filesystem::temp_directory_path() / "glat_resume.ckpt";
  ad::save_checkpoint(path, first.store());
  auto loaded = ad::load_checkpoint(path);
  std::filesystem::remove(path);
  TwoStreamModel<float> resumed(std::move(loaded.params), config.model);
  const auto part2 = run_training(config, resumed, tiny().train, nullptr, 3);

  ASSERT_EQ(part1.steps.size() + part2.steps.size(), straight.steps.size());
  for (std::size_t i = 0; i < straight.steps.size(); ++i) {
    const auto& r = i < 3 ? part1.steps[i] : part2.steps[i - 3];
    EXPECT_NEAR(r.total, straight.steps[i].total, 1e-6);
    EXPECT_EQ(r.total, straight.steps[i].total);
  }
  for (std::size_t p = 0; p < full.store().size(); ++p) {
    EXPECT_EQ(full.store()[p].value.values, resumed.store()[p].value.values);
  }
}

TEST(Trainer, NonFiniteValuesReportTheIteration) {
  auto config = tiny_pipeline_config();
  TwoStreamModel<float> model(config.model, true, 0);
  model.store()[0].value.values[0] = std::numeric_limits<float>::infinity();
  Trainer<float> trainer(config, model, tiny().train);
  try {
    trainer.step(7);
    FAIL() << "expected a numerical fault";
  } catch (const NumericalFault& e) {
    EXPECT_NE(std::string(e.what()).find("iteration 7"), std::string::npos) << e.what();
  }
}

TEST(Trainer, RejectsInconsistentSetups) {
  auto config = tiny_pipeline_config();
  TwoStreamModel<float> base(config.model, false, 0);
  EXPECT_THROW(Trainer<float>(config, base, tiny().train), ConfigError);
  config.num_clips = 5;
  TwoStreamModel<float> glat(config.model, true, 0);
  EXPECT_THROW(Trainer<float>(config, glat, tiny().train), ConfigError);
  config = tiny_pipeline_config();
  config.window_seconds = 0.01;
  EXPECT_THROW(Trainer<float>(config, glat, tiny().train), ConfigError);
}

TEST(Evaluation, AblationModesShareParameters) {
  auto config = tiny_pipeline_config();
  config.trainer.iterations = 4;
  TwoStreamModel<float> model(config.model, true, 0);
  run_training(config, model, tiny().train, nullptr);
  const auto p = predict(model, tiny().eval, config);
  ASSERT_TRUE(p.has_local);
  const auto& g = ablation_scores(p, StreamMode::global_only);
  const auto& l = ablation_scores(p, StreamMode::local_only);
  const auto& f = ablation_scores(p, StreamMode::both);
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    EXPECT_GE(f.values[i], std::min(g.values[i], l.values[i]));
    EXPECT_LE(f.values[i], std::max(g.values[i], l.values[i]));
  }
  const auto& ex = tiny().eval.examples[2];
  for (StreamMode mode : {StreamMode::global_only, StreamMode::local_only, StreamMode::both}) {
    const auto single = fused_inference(model, ex, config, mode);
    const auto& table = ablation_scores(p, mode);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(single[j], table(2, j));
  }
}

TEST(Evaluation, BaselineHasOnlyGlobalScores) {
  auto config = tiny_pipeline_config();
  config.trainer.mode = TrainMode::baseline;
  config.trainer.iterations = 3;
  TwoStreamModel<float> model(config.model, false, 0);
  const auto run = run_training(config, model, tiny().train, &tiny().eval);
  ASSERT_EQ(run.history.size(), 1u);
  EXPECT_FALSE(run.history[0].local_loss.has_value());
  const auto p = predict(model, tiny().eval, config);
  EXPECT_FALSE(p.has_local);
  EXPECT_THROW(ablation_scores(p, StreamMode::both), UsageError);
  EXPECT_THROW(fused_inference(model, tiny().eval.examples[0], config, StreamMode::local_only), UsageError);

  // The global stream of the baseline is the plain clip classifier.
  ad::Graph<float> graph;
  const auto a = model.global_stream().attach(graph);
  const auto probs = classify(global_pool(extract_features(graph, tiny().eval.examples[0].spec, a)), a).probs;
  for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(p.global(0, j), probs.values()[j]);
}

TEST(Training, HistoryFollowsEvalCadence) {
  auto config = tiny_pipeline_config();
  config.trainer.iterations = 7;
  config.trainer.eval_every = 3;
  TwoStreamModel<float> model(config.model, true, 0);
  std::vector<std::int64_t> seen;
  TrainingObserver obs;
  obs.on_eval = [&](const EvalRecord& r) { seen.push_back(r.iteration); };
  const auto run = run_training(config, model, tiny().train, &tiny().eval, 0, obs);
  EXPECT_EQ(seen, (std::vector<std::int64_t>{3, 6, 7}));
  EXPECT_EQ(run.steps.size(), 7u);
  EXPECT_EQ(run.iterations_done, 7);
  const auto json = run.history.back().to_json();
  for (const char* key : {"\"iter\"", "\"L_g\"", "\"L_l\"", "\"mAP\"", "\"mAUC\"", "\"d_prime\""}) {
    EXPECT_NE(json.find(key), std::string::npos);
  }
}

TEST(Localization, TrainedGlobalStreamPeaksInsideToneBursts) {
  CorpusConfig cc;
  cc.num_train_clips = 64;
  cc.num_eval_clips = 40;
  cc.num_short_classes = 4;
  cc.num_long_classes = 0;
  cc.clip_seconds = 4.0;
  cc.max_events = 2;
  cc.snr_min_db = 20.0;
  cc.snr_max_db = 30.0;
  cc.background_rms = 0.003;
  const auto corpus = generate_synthetic_corpus(cc, 5);

  PipelineConfig config;
  config.frontend.hop_samples = 320;
  config.frontend.mel_bins = 32;
  config.model.channels = {8, 16, 16};
  config.model.hidden_units = 32;
  config.model.num_classes = 4;
  config.trainer.mode = TrainMode::baseline;
  config.trainer.batch_size = 8;
  config.trainer.iterations = 200;
  config.trainer.adam.lr = 3e-3;
  const LogMelFrontend frontend(config.frontend);
  const auto train = Dataset::from_corpus(corpus, Split::train, frontend);
  const auto eval = Dataset::from_corpus(corpus, Split::eval, frontend);
  TwoStreamModel<float> model(config.model, false, 5);
  run_training(config, model, train, nullptr);

  const double frame_rate = config.selector().frame_rate;
  int hits = 0, total = 0;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    for (const auto& ev : corpus.manifest(Split::eval).entries[i].events) {
      if (ev.class_index != 0) continue;
      ad::Graph<float> g;
      g.set_grad_enabled(false);
      const auto a = model.global_stream().attach(g);
      const auto map = to_activation_map(frame_activations(extract_features(g, eval.examples[i].spec, a), a));
      const auto column = map.column(0);
      const auto m = static_cast<double>(std::max_element(column.begin(), column.end()) - column.begin());
      // Frame m covers [m, m + 1) / frame_rate.
      hits += (m + 1.0) / frame_rate > ev.onset_s && m / frame_rate < ev.offset_s ? 1 : 0;
      ++total;
    }
  }
  ASSERT_GT(total, 5);
  EXPECT_GE(static_cast<double>(hits) / total, 0.8) << hits << "/" << total;
}
