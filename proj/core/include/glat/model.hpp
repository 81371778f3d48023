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
#include <random>
#include <string>
#include <vector>

#include "glat/autodiff.hpp"
#include "glat/features.hpp"

namespace glat {

/// Desk-scale CNN backbone plus two-layer classifier.
///
/// Each conv block is conv(k x k, same padding) -> relu -> 2x2 average pool,
/// where the first \c time_pool_blocks blocks pool time and frequency and the
/// remaining ones pool frequency only. The leftover frequency axis is
/// averaged away, leaving a T x C frame feature map.
struct ModelConfig {
  std::vector<int> channels{16, 32, 64, 64};
  int kernel_size = 3;
  int time_pool_blocks = 2;
  int hidden_units = 128;
  int num_classes = 8;
  /// Log-mel inputs enter the network as (x - input_shift) / input_scale.
  double input_shift = -4.0;
  double input_scale = 4.0;
  /// Std of the last layer's initial weights; small so untrained logits are ~0.
  double final_init_std = 1e-3;

  static constexpr std::size_t kMinFrames = 8;

  [[nodiscard]] std::size_t time_downsample() const { return std::size_t{1} << time_pool_blocks; }
  [[nodiscard]] std::size_t feature_channels() const { return static_cast<std::size_t>(channels.back()); }
  /// Frames of M for a spectrogram with \p spec_frames frames.
  [[nodiscard]] std::size_t output_frames(std::size_t spec_frames) const;
  void validate() const;
};

/// Parameter slots of one stream (feature extractor F and classifier C)
/// inside a ParameterStore. Names are "<prefix>.F.conv<i>.{weight,bias}" and
/// "<prefix>.C.fc{1,2}.{weight,bias}".
template <typename T>
class StreamModel {
 public:
  /// Registers freshly initialized parameters (He-normal convs, zero biases).
  static StreamModel create(ad::ParameterStore<T>& store, const std::string& prefix, const ModelConfig& config,
                            std::mt19937_64& rng);
  /// Binds to parameters already in the store. Throws FormatError if any is
  /// missing or has the wrong shape.
  static StreamModel bind(ad::ParameterStore<T>& store, const std::string& prefix, const ModelConfig& config);

  [[nodiscard]] const ModelConfig& config() const { return config_; }
  [[nodiscard]] const std::string& prefix() const { return prefix_; }
  [[nodiscard]] ad::ParameterStore<T>& store() const { return *store_; }

  /// Parameter nodes of this stream inside one graph.
  struct Attached {
    std::vector<ad::Var<T>> conv_weight;
    std::vector<ad::Var<T>> conv_bias;
    ad::Var<T> fc1_weight, fc1_bias, fc2_weight, fc2_bias;
    const ModelConfig* config = nullptr;
  };

  /// Adds every parameter of the stream to \p graph once; all uses within
  /// the graph share these nodes.
  [[nodiscard]] Attached attach(ad::Graph<T>& graph) const;

  [[nodiscard]] std::vector<std::size_t> slots() const;

 private:
  StreamModel(ad::ParameterStore<T>& store, std::string prefix, ModelConfig config)
      : store_(&store), prefix_(std::move(prefix)), config_(std::move(config)) {}

  ad::ParameterStore<T>* store_;
  std::string prefix_;
  ModelConfig config_;
  std::vector<std::size_t> conv_weight_, conv_bias_;
  std::size_t fc1_weight_ = 0, fc1_bias_ = 0, fc2_weight_ = 0, fc2_bias_ = 0;
};

/// Classifier output: logits and their sigmoid.
template <typename T>
struct Prediction {
  ad::Var<T> logits;
  ad::Var<T> probs;
};

/// M = F(spec): [T, C]. Throws ShapeError below ModelConfig::kMinFrames frames.
template <typename T>
ad::Var<T> extract_features(ad::Graph<T>& graph, const LogMelSpectrogram& spec,
                            const typename StreamModel<T>::Attached& stream);

/// M' = max_t M + mean_t M: [C].
template <typename T>
ad::Var<T> global_pool(ad::Var<T> frame_features);

/// C(v) = W2 relu(W1 v + b1) + b2 followed by the sigmoid. \p v may be a
/// single clip vector [C] or a stack of frames [T, C].
template <typename T>
Prediction<T> classify(ad::Var<T> v, const typename StreamModel<T>::Attached& stream);

/// S_g: the clip classifier applied to every frame of M, [T, L].
template <typename T>
ad::Var<T> frame_activations(ad::Var<T> frame_features, const typename StreamModel<T>::Attached& stream);

/// Plain-value copy of S_g, rows are frames of M.
struct ClassActivationMap {
  FrameMatrix activations;

  [[nodiscard]] std::size_t frames() const { return activations.rows; }
  [[nodiscard]] std::size_t num_classes() const { return activations.cols; }
  [[nodiscard]] std::vector<double> column(std::size_t class_index) const;
};

template <typename T>
ClassActivationMap to_activation_map(ad::Var<T> activations);

}  // namespace glat
