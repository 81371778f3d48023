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

#include "glat/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "glat/errors.hpp"

namespace glat {

namespace {

constexpr const char* kGlobalPrefix = "global";
constexpr const char* kLocalPrefix = "local";

/// Runs fn(i) for i in [0, n) on up to \p threads workers. If several calls
/// throw, the exception of the lowest index wins.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

template <typename T>
std::vector<T> label_targets(const WeakLabelVector& labels) {
  std::vector<T> out(labels.num_classes());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = labels[i] ? T{1} : T{0};
  return out;
}

double bce_value(std::span<const double> probs, const WeakLabelVector& labels) {
  double loss = 0.0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    const double p = std::clamp(probs[j], ad::kBceEpsilon, 1.0 - ad::kBceEpsilon);
    loss -= labels[j] ? std::log(p) : std::log(1.0 - p);
  }
  return loss;
}

template <typename T>
std::vector<double> to_doubles(std::span<const T> v) {
  return {v.begin(), v.end()};
}

}  // namespace

const char* to_string(TrainMode mode) { return mode == TrainMode::baseline ? "baseline" : "glat"; }

const char* to_string(StreamMode mode) {
  switch (mode) {
    case StreamMode::global_only:
      return "global";
    case StreamMode::local_only:
      return "local";
    case StreamMode::both:
      break;
  }
  return "both";
}

TrainMode parse_train_mode(const std::string& text) {
  if (text == "baseline") return TrainMode::baseline;
  if (text == "glat") return TrainMode::glat;
  throw ConfigError("unknown training mode '" + text + "' (expected baseline or glat)");
}

StreamMode parse_stream_mode(const std::string& text) {
  if (text == "global") return StreamMode::global_only;
  if (text == "local") return StreamMode::local_only;
  if (text == "both") return StreamMode::both;
  throw ConfigError("unknown inference mode '" + text + "' (expected global, local or both)");
}

// ------------------------------------------------------------------ config

SelectorConfig PipelineConfig::selector() const {
  SelectorConfig s;
  s.num_clips = num_clips;
  s.window_seconds = window_seconds;
  s.frame_rate = frontend.frame_rate() / static_cast<double>(model.time_downsample());
  return s;
}

void PipelineConfig::validate(double clip_seconds) const {
  frontend.validate();
  model.validate();
  if (trainer.batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (trainer.iterations < 0) throw ConfigError("iteration count must be non-negative");
  if (trainer.eval_every < 0) throw ConfigError("eval interval must be non-negative");
  if (trainer.threads < 1) throw ConfigError("thread count must be at least 1");
  if (!(trainer.adam.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (trainer.mode == TrainMode::glat) {
    selector().validate(static_cast<std::size_t>(model.num_classes), clip_seconds);
    const auto samples = static_cast<std::size_t>(std::llround(window_seconds * frontend.sample_rate));
    if (samples < static_cast<std::size_t>(frontend.win_samples) ||
        frontend.num_frames(samples) < ModelConfig::kMinFrames) {
      throw ConfigError("window of " + std::to_string(window_seconds) +
                        " s is too short for the local stream");
    }
  }
}

// ------------------------------------------------------------------ dataset

FrameMatrix Dataset::targets() const {
  FrameMatrix t(examples.size(), static_cast<std::size_t>(num_classes));
  for (std::size_t e = 0; e < examples.size(); ++e) {
    for (std::size_t j = 0; j < t.cols; ++j) t(e, j) = examples[e].labels[j] ? 1.0 : 0.0;
  }
  return t;
}

Dataset Dataset::from_corpus(const SyntheticCorpus& corpus, Split split, const LogMelFrontend& frontend) {
  const auto& manifest = corpus.manifest(split);
  Dataset data;
  data.num_classes = manifest.num_classes;
  data.examples.resize(manifest.size());
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    auto& ex = data.examples[i];
    ex.clip = corpus.render(split, i);
    if (ex.clip.sample_rate != frontend.config().sample_rate) {
      ex.clip = resample(ex.clip, frontend.config().sample_rate);
    }
    ex.spec = frontend.compute(ex.clip);
    ex.labels = WeakLabelVector::from_indices(manifest.entries[i].labels,
                                              static_cast<std::size_t>(manifest.num_classes));
  }
  return data;
}

Dataset Dataset::from_manifest(const DatasetManifest& manifest, const std::filesystem::path& root,
                               const LogMelFrontend& frontend) {
  manifest.validate();
  Dataset data;
  data.num_classes = manifest.num_classes;
  data.examples.resize(manifest.size());
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    auto& ex = data.examples[i];
    ex.clip = read_wav(root / manifest.entries[i].path);
    if (ex.clip.sample_rate != frontend.config().sample_rate) {
      ex.clip = resample(ex.clip, frontend.config().sample_rate);
    }
    ex.spec = frontend.compute(ex.clip);
    ex.labels = WeakLabelVector::from_indices(manifest.entries[i].labels,
                                              static_cast<std::size_t>(manifest.num_classes));
  }
  return data;
}

// ------------------------------------------------------------------ model

template <typename T>
TwoStreamModel<T>::TwoStreamModel(const ModelConfig& config, bool with_local, std::uint64_t seed)
    : store_(std::make_unique<ad::ParameterStore<T>>()) {
  std::seed_seq global_seq{seed, std::uint64_t{0x61}};
  std::mt19937_64 global_rng(global_seq);
  global_ = StreamModel<T>::create(*store_, kGlobalPrefix, config, global_rng);
  if (with_local) {
    std::seed_seq local_seq{seed, std::uint64_t{0x6c}};
    std::mt19937_64 local_rng(local_seq);
    local_ = StreamModel<T>::create(*store_, kLocalPrefix, config, local_rng);
  }
}

template <typename T>
TwoStreamModel<T>::TwoStreamModel(ad::ParameterStore<T> store, const ModelConfig& config)
    : store_(std::make_unique<ad::ParameterStore<T>>(std::move(store))) {
  global_ = StreamModel<T>::bind(*store_, kGlobalPrefix, config);
  const bool any_local = std::any_of(store_->begin(), store_->end(), [](const ad::Parameter<T>& p) {
    return p.name.rfind(std::string(kLocalPrefix) + ".", 0) == 0;
  });
  if (any_local) local_ = StreamModel<T>::bind(*store_, kLocalPrefix, config);
}

// ------------------------------------------------------------------ forward

template <typename T>
ad::Var<T> aggregate_local(ad::Var<T> per_clip_probs) {
  if (per_clip_probs.shape().size() != 2 || per_clip_probs.shape()[0] == 0) {
    throw UsageError("local aggregation needs at least one clip prediction, got shape " +
                     ad::shape_string(per_clip_probs.shape()));
  }
  const auto pooled = ad::add(ad::max_axis(per_clip_probs, 0), ad::mean_axis(per_clip_probs, 0));
  return ad::scale(pooled, T{0.5});
}

std::vector<double> aggregate_local(const FrameMatrix& per_clip_probs) {
  if (per_clip_probs.rows == 0) throw UsageError("local aggregation needs at least one clip prediction");
  std::vector<double> out(per_clip_probs.cols);
  for (std::size_t j = 0; j < out.size(); ++j) {
    double hi = per_clip_probs(0, j);
    double total = 0.0;
    for (std::size_t n = 0; n < per_clip_probs.rows; ++n) {
      hi = std::max(hi, per_clip_probs(n, j));
      total += per_clip_probs(n, j);
    }
    out[j] = 0.5 * (hi + total / static_cast<double>(per_clip_probs.rows));
  }
  return out;
}

std::vector<double> fuse_predictions(std::span<const double> global, std::span<const double> local) {
  if (global.size() != local.size()) {
    throw ShapeError("cannot fuse " + std::to_string(global.size()) + " global scores with " +
                     std::to_string(local.size()) + " local scores");
  }
  std::vector<double> out(global.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = 0.5 * (std::max(global[j], local[j]) + 0.5 * (global[j] + local[j]));
  }
  return out;
}

template <typename T>
StreamOutputs<T> forward_two_stream(ad::Graph<T>& graph, const TwoStreamModel<T>& model, const Example& example,
                                    const PipelineConfig& config, const LogMelFrontend& frontend,
                                    std::span<const CandidateClip> fixed_windows) {
  StreamOutputs<T> out;
  const auto global = model.global_stream().attach(graph);
  const auto features = extract_features(graph, example.spec, global);
  out.global_probs = classify(global_pool(features), global).probs;
  out.activations = frame_activations(features, global);
  const auto* local_stream = model.local_stream();
  if (local_stream == nullptr) return out;

  const double clip_seconds = example.clip.duration_seconds();
  if (fixed_windows.empty()) {
    out.windows = select_candidates(to_activation_map(out.activations), config.selector(), clip_seconds,
                                    example.clip.sample_rate);
  } else {
    out.windows.assign(fixed_windows.begin(), fixed_windows.end());
  }
  const auto batch = extract_subclips(example.clip, out.windows, config.window_seconds);
  const auto local = local_stream->attach(graph);
  std::vector<ad::Var<T>> clip_probs;
  clip_probs.reserve(batch.clips.size());
  for (const auto& sub : batch.clips) {
    const auto spec = frontend.compute(sub);
    clip_probs.push_back(classify(global_pool(extract_features(graph, spec, local)), local).probs);
  }
  if (clip_probs.empty()) throw UsageError("the local stream needs at least one selected clip");
  out.per_clip_probs = ad::stack<T>(clip_probs);
  out.local_probs = aggregate_local(out.per_clip_probs);
  return out;
}

template <typename T>
ExampleLoss<T> two_stream_loss(ad::Graph<T>& graph, const TwoStreamModel<T>& model, const Example& example,
                               const PipelineConfig& config, const LogMelFrontend& frontend,
                               std::span<const CandidateClip> fixed_windows) {
  ExampleLoss<T> loss;
  loss.outputs = forward_two_stream(graph, model, example, config, frontend, fixed_windows);
  const auto target = label_targets<T>(example.labels);
  loss.global_loss = ad::bce_loss(loss.outputs.global_probs, std::span<const T>(target));
  loss.total = loss.global_loss;
  if (loss.outputs.local_probs.valid()) {
    loss.local_loss = ad::bce_loss(loss.outputs.local_probs, std::span<const T>(target));
    loss.total = ad::add(loss.global_loss, loss.local_loss);
  }
  return loss;
}

// ------------------------------------------------------------------ trainer

template <typename T>
Trainer<T>::Trainer(PipelineConfig config, TwoStreamModel<T>& model, const Dataset& train)
    : config_(std::move(config)), model_(&model), train_(&train), frontend_(config_.frontend) {
  if (train.examples.empty()) throw ConfigError("training set is empty");
  if (train.num_classes != config_.model.num_classes) {
    throw ConfigError("dataset has " + std::to_string(train.num_classes) + " classes but the model has " +
                      std::to_string(config_.model.num_classes));
  }
  if ((config_.trainer.mode == TrainMode::glat) != model.has_local()) {
    throw ConfigError(std::string("model streams do not match training mode ") + to_string(config_.trainer.mode));
  }
  config_.validate(train.examples.front().clip.duration_seconds());
}

template <typename T>
std::vector<std::size_t> Trainer<T>::batch_indices(std::int64_t iteration) const {
  if (iteration < 0) throw UsageError("iteration must be non-negative");
  const std::size_t n = train_->size();
  const auto b = static_cast<std::size_t>(config_.trainer.batch_size);
  std::vector<std::size_t> batch;
  batch.reserve(b);
  std::vector<std::size_t> perm(n);
  std::size_t perm_epoch = std::numeric_limits<std::size_t>::max();
  for (std::size_t j = 0; j < b; ++j) {
    const std::size_t pos = static_cast<std::size_t>(iteration) * b + j;
    const std::size_t epoch = pos / n;
    if (epoch != perm_epoch) {
      for (std::size_t i = 0; i < n; ++i) perm[i] = i;
      std::seed_seq seq{config_.trainer.seed, static_cast<std::uint64_t>(epoch), std::uint64_t{0x62}};
      std::mt19937_64 rng(seq);
      std::shuffle(perm.begin(), perm.end(), rng);
      perm_epoch = epoch;
    }
    batch.push_back(perm[pos % n]);
  }
  return batch;
}

template <typename T>
LossReport Trainer<T>::train_step(std::span<const std::size_t> batch, std::int64_t iteration) {
  if (batch.empty()) throw UsageError("empty training batch");
  auto& store = model_->store();
  while (buffers_.size() < batch.size()) buffers_.emplace_back(store);
  std::vector<double> global_losses(batch.size(), 0.0);
  std::vector<double> local_losses(batch.size(), 0.0);
  try {
    parallel_for(batch.size(), config_.trainer.threads, [&](std::size_t k) {
      const auto& example = train_->examples.at(batch[k]);
      ad::Graph<T> graph;
      auto loss = two_stream_loss(graph, *model_, example, config_, frontend_);
      global_losses[k] = static_cast<double>(loss.global_loss.item());
      if (loss.local_loss.valid()) local_losses[k] = static_cast<double>(loss.local_loss.item());
      buffers_[k].clear();
      graph.backward(loss.total, buffers_[k]);
    });
  } catch (const NumericalFault& fault) {
    throw NumericalFault("iteration " + std::to_string(iteration) + ": " + fault.what());
  }

  store.zero_grad();
  const T inv = T{1} / static_cast<T>(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) buffers_[k].add_to(store, inv);
  for (auto& p : store) {
    for (T g : p.grad) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw NumericalFault("iteration " + std::to_string(iteration) + ": non-finite gradient in " + p.name);
      }
    }
  }
  ad::adam_step(store, config_.trainer.adam);

  LossReport report;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    report.global_loss += global_losses[k];
    report.local_loss += local_losses[k];
  }
  report.global_loss /= static_cast<double>(batch.size());
  report.local_loss /= static_cast<double>(batch.size());
  report.total = report.global_loss + report.local_loss;
  if (!std::isfinite(report.total)) {
    throw NumericalFault("iteration " + std::to_string(iteration) + ": non-finite loss");
  }
  return report;
}

// ------------------------------------------------------------------ evaluation

template <typename T>
EvalPredictions predict(const TwoStreamModel<T>& model, const Dataset& data, const PipelineConfig& config,
                        int threads) {
  const LogMelFrontend frontend(config.frontend);
  const std::size_t e = data.size();
  const auto l = static_cast<std::size_t>(data.num_classes);
  EvalPredictions out;
  out.has_local = model.has_local();
  out.targets = data.targets();
  out.global = FrameMatrix(e, l);
  if (out.has_local) {
    out.local = FrameMatrix(e, l);
    out.fused = FrameMatrix(e, l);
  }
  std::vector<double> global_losses(e, 0.0);
  std::vector<double> local_losses(e, 0.0);
  parallel_for(e, threads, [&](std::size_t i) {
    const auto& ex = data.examples[i];
    ad::Graph<T> graph;
    graph.set_grad_enabled(false);
    const auto outputs = forward_two_stream(graph, model, ex, config, frontend);
    const auto g = to_doubles<T>(outputs.global_probs.values());
    std::copy(g.begin(), g.end(), out.global.values.begin() + static_cast<std::ptrdiff_t>(i * l));
    global_losses[i] = bce_value(g, ex.labels);
    if (out.has_local) {
      const auto lp = to_doubles<T>(outputs.local_probs.values());
      std::copy(lp.begin(), lp.end(), out.local.values.begin() + static_cast<std::ptrdiff_t>(i * l));
      const auto fused = fuse_predictions(g, lp);
      std::copy(fused.begin(), fused.end(), out.fused.values.begin() + static_cast<std::ptrdiff_t>(i * l));
      local_losses[i] = bce_value(lp, ex.labels);
    }
  });
  for (std::size_t i = 0; i < e; ++i) {
    out.global_loss += global_losses[i];
    out.local_loss += local_losses[i];
  }
  if (e > 0) {
    out.global_loss /= static_cast<double>(e);
    out.local_loss /= static_cast<double>(e);
  }
  return out;
}

const FrameMatrix& ablation_scores(const EvalPredictions& predictions, StreamMode mode) {
  if (mode == StreamMode::global_only) return predictions.global;
  if (!predictions.has_local) {
    throw UsageError(std::string("inference mode '") + to_string(mode) + "' needs a local stream");
  }
  return mode == StreamMode::local_only ? predictions.local : predictions.fused;
}

template <typename T>
std::vector<double> fused_inference(const TwoStreamModel<T>& model, const Example& example,
                                    const PipelineConfig& config, StreamMode mode) {
  if (mode != StreamMode::global_only && !model.has_local()) {
    throw UsageError(std::string("inference mode '") + to_string(mode) + "' needs a local stream");
  }
  const LogMelFrontend frontend(config.frontend);
  ad::Graph<T> graph;
  graph.set_grad_enabled(false);
  if (mode == StreamMode::global_only) {
    const auto global = model.global_stream().attach(graph);
    const auto features = extract_features(graph, example.spec, global);
    return to_doubles<T>(classify(global_pool(features), global).probs.values());
  }
  const auto outputs = forward_two_stream(graph, model, example, config, frontend);
  const auto g = to_doubles<T>(outputs.global_probs.values());
  const auto lp = to_doubles<T>(outputs.local_probs.values());
  return mode == StreamMode::local_only ? lp : fuse_predictions(g, lp);
}

std::string EvalRecord::to_json() const {
  nlohmann::ordered_json j;
  j["iter"] = iteration;
  j["L_g"] = global_loss;
  if (local_loss) {
    j["L_l"] = *local_loss;
  } else {
    j["L_l"] = nullptr;
  }
  j["mAP"] = mean_ap;
  j["mAUC"] = mean_auc;
  j["d_prime"] = d_prime;
  return j.dump();
}

template <typename T>
EvalRecord evaluate_record(const TwoStreamModel<T>& model, const Dataset& eval, const PipelineConfig& config,
                           std::int64_t iteration) {
  const auto predictions = predict(model, eval, config, config.trainer.threads);
  const auto& scores = ablation_scores(predictions, predictions.has_local ? StreamMode::both : StreamMode::global_only);
  const auto table = evaluate_table(scores, predictions.targets);
  EvalRecord rec;
  rec.iteration = iteration;
  rec.global_loss = predictions.global_loss;
  if (predictions.has_local) rec.local_loss = predictions.local_loss;
  rec.mean_ap = table.mean_ap;
  rec.mean_auc = table.mean_auc;
  rec.d_prime = table.mean_d_prime;
  return rec;
}

template <typename T>
TrainingRun run_training(const PipelineConfig& config, TwoStreamModel<T>& model, const Dataset& train,
                         const Dataset* eval, std::int64_t start_iteration, const TrainingObserver& observer) {
  Trainer<T> trainer(config, model, train);
  TrainingRun run;
  run.config = config;
  run.seed = config.trainer.seed;
  run.dataset_size = train.size();
  run.iterations_done = start_iteration;
  const std::int64_t total = config.trainer.iterations;
  const std::int64_t every = config.trainer.eval_every;
  std::int64_t last_eval = -1;
  for (std::int64_t it = start_iteration; it < total; ++it) {
    const auto report = trainer.step(it);
    run.steps.push_back(report);
    run.iterations_done = it + 1;
    if (observer.on_step) observer.on_step(it, report);
    if (eval != nullptr && every > 0 && (it + 1) % every == 0) {
      run.history.push_back(evaluate_record(model, *eval, config, it + 1));
      last_eval = it + 1;
      if (observer.on_eval) observer.on_eval(run.history.back());
    }
  }
  if (eval != nullptr && last_eval != run.iterations_done) {
    run.history.push_back(evaluate_record(model, *eval, config, run.iterations_done));
    if (observer.on_eval) observer.on_eval(run.history.back());
  }
  return run;
}

#define GLAT_INSTANTIATE(T)                                                                                 \
  template class TwoStreamModel<T>;                                                                        \
  template class Trainer<T>;                                                                               \
  template ad::Var<T> aggregate_local(ad::Var<T>);                                                         \
  template StreamOutputs<T> forward_two_stream(ad::Graph<T>&, const TwoStreamModel<T>&, const Example&,    \
                                               const PipelineConfig&, const LogMelFrontend&,               \
                                               std::span<const CandidateClip>);                            \
  template ExampleLoss<T> two_stream_loss(ad::Graph<T>&, const TwoStreamModel<T>&, const Example&,         \
                                          const PipelineConfig&, const LogMelFrontend&,                    \
                                          std::span<const CandidateClip>);                                 \
  template EvalPredictions predict(const TwoStreamModel<T>&, const Dataset&, const PipelineConfig&, int);  \
  template std::vector<double> fused_inference(const TwoStreamModel<T>&, const Example&,                  \
                                               const PipelineConfig&, StreamMode);                         \
  template EvalRecord evaluate_record(const TwoStreamModel<T>&, const Dataset&, const PipelineConfig&,     \
                                      std::int64_t);                                                       \
  template TrainingRun run_training(const PipelineConfig&, TwoStreamModel<T>&, const Dataset&,             \
                                    const Dataset*, std::int64_t, const TrainingObserver&);

GLAT_INSTANTIATE(float)
GLAT_INSTANTIATE(double)

}  // namespace glat
