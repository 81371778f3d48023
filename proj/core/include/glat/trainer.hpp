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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glat/audio.hpp"
#include "glat/autodiff.hpp"
#include "glat/corpus.hpp"
#include "glat/features.hpp"
#include "glat/manifest.hpp"
#include "glat/metrics.hpp"
#include "glat/model.hpp"
#include "glat/selector.hpp"

namespace glat {

enum class TrainMode { baseline, glat };
/// Which predictions an evaluation reports.
enum class StreamMode { global_only, local_only, both };

const char* to_string(TrainMode mode);
const char* to_string(StreamMode mode);
TrainMode parse_train_mode(const std::string& text);
StreamMode parse_stream_mode(const std::string& text);

struct TrainerConfig {
  TrainMode mode = TrainMode::glat;
  int batch_size = 32;
  std::int64_t iterations = 2000;
  /// Evaluate every this many iterations (and after the last one); 0 = end only.
  std::int64_t eval_every = 500;
  std::uint64_t seed = 0;
  /// Worker threads for per-example passes. Results do not depend on it.
  int threads = 1;
  ad::AdamConfig adam;
};

/// Everything a two-stream run needs besides data.
struct PipelineConfig {
  FrontendConfig frontend;
  ModelConfig model;
  int num_clips = 5;
  double window_seconds = 3.0;
  TrainerConfig trainer;

  [[nodiscard]] SelectorConfig selector() const;
  void validate(double clip_seconds) const;
};

/// Clip, its global log-mel, and its weak labels. Event timestamps are
/// deliberately absent.
struct Example {
  AudioClip clip;
  LogMelSpectrogram spec;
  WeakLabelVector labels;
};

struct Dataset {
  std::vector<Example> examples;
  int num_classes = 0;

  [[nodiscard]] std::size_t size() const { return examples.size(); }
  /// E x L matrix of 0/1 labels.
  [[nodiscard]] FrameMatrix targets() const;

  static Dataset from_corpus(const SyntheticCorpus& corpus, Split split, const LogMelFrontend& frontend);
  /// Loads the WAV files of \p manifest (paths relative to \p root),
  /// resampling to the frontend rate where needed.
  static Dataset from_manifest(const DatasetManifest& manifest, const std::filesystem::path& root,
                               const LogMelFrontend& frontend);
};

/// Global stream plus (for GL-AT) an identically shaped local stream, with
/// all parameters in one store under the "global." and "local." prefixes.
template <typename T>
class TwoStreamModel {
 public:
  /// Fresh initialization. The global stream's draw depends only on \p seed,
  /// so baseline and GL-AT models with one seed share their global start.
  TwoStreamModel(const ModelConfig& config, bool with_local, std::uint64_t seed);
  /// Adopts loaded parameters; the local stream is bound if present.
  TwoStreamModel(ad::ParameterStore<T> store, const ModelConfig& config);

  [[nodiscard]] ad::ParameterStore<T>& store() { return *store_; }
  [[nodiscard]] const ad::ParameterStore<T>& store() const { return *store_; }
  [[nodiscard]] const StreamModel<T>& global_stream() const { return *global_; }
  [[nodiscard]] const StreamModel<T>* local_stream() const { return local_ ? &*local_ : nullptr; }
  [[nodiscard]] bool has_local() const { return local_.has_value(); }
  [[nodiscard]] const ModelConfig& config() const { return global_->config(); }

 private:
  std::unique_ptr<ad::ParameterStore<T>> store_;
  std::optional<StreamModel<T>> global_;
  std::optional<StreamModel<T>> local_;
};

/// Nodes produced by one two-stream forward pass over a single clip.
template <typename T>
struct StreamOutputs {
  ad::Var<T> global_probs;    // y_g, [L]
  ad::Var<T> activations;     // S_g, [T, L]
  std::vector<CandidateClip> windows;
  ad::Var<T> per_clip_probs;  // y_1..y_N, [N, L]
  ad::Var<T> local_probs;     // y_l, [L]
};

/// Runs the global stream and, when the model has one, selects sub-clips and
/// runs the local stream on them. \p fixed_windows replaces the selection
/// (used to differentiate with the discrete choice held constant).
template <typename T>
StreamOutputs<T> forward_two_stream(ad::Graph<T>& graph, const TwoStreamModel<T>& model, const Example& example,
                                    const PipelineConfig& config, const LogMelFrontend& frontend,
                                    std::span<const CandidateClip> fixed_windows = {});

/// y_l = (max_n + mean_n) / 2 over the clip axis of [N, L].
template <typename T>
ad::Var<T> aggregate_local(ad::Var<T> per_clip_probs);
std::vector<double> aggregate_local(const FrameMatrix& per_clip_probs);

/// (max(g, l) + (g + l) / 2) / 2 per class.
std::vector<double> fuse_predictions(std::span<const double> global, std::span<const double> local);

struct LossReport {
  double global_loss = 0.0;
  double local_loss = 0.0;
  double total = 0.0;
};

/// L_g + L_l for one example as a graph node, with the two terms.
template <typename T>
struct ExampleLoss {
  ad::Var<T> total;
  ad::Var<T> global_loss;
  ad::Var<T> local_loss;  // invalid for baseline models
  StreamOutputs<T> outputs;
};

template <typename T>
ExampleLoss<T> two_stream_loss(ad::Graph<T>& graph, const TwoStreamModel<T>& model, const Example& example,
                               const PipelineConfig& config, const LogMelFrontend& frontend,
                               std::span<const CandidateClip> fixed_windows = {});

/// Joint optimization of both streams with one Adam step per batch.
template <typename T>
class Trainer {
 public:
  Trainer(PipelineConfig config, TwoStreamModel<T>& model, const Dataset& train);

  /// Batch for \p iteration: consecutive slices of per-epoch permutations
  /// seeded by (seed, epoch).
  [[nodiscard]] std::vector<std::size_t> batch_indices(std::int64_t iteration) const;

  /// Forward, one backward pass and one Adam step over \p batch. Losses are
  /// means over the batch of class-summed BCE. Throws NumericalFault naming
  /// \p iteration on any non-finite value.
  LossReport train_step(std::span<const std::size_t> batch, std::int64_t iteration);
  LossReport step(std::int64_t iteration) { return train_step(batch_indices(iteration), iteration); }

  [[nodiscard]] const PipelineConfig& config() const { return config_; }
  [[nodiscard]] const LogMelFrontend& frontend() const { return frontend_; }

 private:
  PipelineConfig config_;
  TwoStreamModel<T>* model_;
  const Dataset* train_;
  LogMelFrontend frontend_;
  std::vector<ad::GradientBuffer<T>> buffers_;
};

/// E x L score matrices for every stream the model has.
struct EvalPredictions {
  FrameMatrix global;
  FrameMatrix local;  // empty for baseline models
  FrameMatrix fused;  // empty for baseline models
  FrameMatrix targets;
  bool has_local = false;
  double global_loss = 0.0;
  double local_loss = 0.0;
};

template <typename T>
EvalPredictions predict(const TwoStreamModel<T>& model, const Dataset& data, const PipelineConfig& config,
                        int threads = 1);

/// Scores of one inference mode. Throws UsageError for local/both modes on a
/// model without a local stream.
const FrameMatrix& ablation_scores(const EvalPredictions& predictions, StreamMode mode);

/// Final scores of a single clip under \p mode.
template <typename T>
std::vector<double> fused_inference(const TwoStreamModel<T>& model, const Example& example,
                                    const PipelineConfig& config, StreamMode mode = StreamMode::both);

struct EvalRecord {
  std::int64_t iteration = 0;
  double global_loss = 0.0;
  std::optional<double> local_loss;
  double mean_ap = 0.0;
  double mean_auc = 0.0;
  double d_prime = 0.0;

  [[nodiscard]] std::string to_json() const;
};

struct TrainingRun {
  PipelineConfig config;
  std::uint64_t seed = 0;
  std::int64_t iterations_done = 0;
  std::size_t dataset_size = 0;
  std::vector<EvalRecord> history;
  std::vector<LossReport> steps;
};

struct TrainingObserver {
  std::function<void(std::int64_t iteration, const LossReport&)> on_step;
  std::function<void(const EvalRecord&)> on_eval;
};

/// Trains from \p start_iteration up to config.trainer.iterations, evaluating
/// on \p eval (if given) every eval_every iterations and at the end. Metrics
/// use fused scores for GL-AT and global scores for the baseline.
template <typename T>
TrainingRun run_training(const PipelineConfig& config, TwoStreamModel<T>& model, const Dataset& train,
                         const Dataset* eval, std::int64_t start_iteration = 0, const TrainingObserver& observer = {});

/// Two-stream evaluation record at \p iteration.
template <typename T>
EvalRecord evaluate_record(const TwoStreamModel<T>& model, const Dataset& eval, const PipelineConfig& config,
                           std::int64_t iteration);

}  // namespace glat
