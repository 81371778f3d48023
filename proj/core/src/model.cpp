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

#include "glat/model.hpp"

#include <cmath>

#include "glat/errors.hpp"

namespace glat {

std::size_t ModelConfig::output_frames(std::size_t spec_frames) const {
  std::size_t t = spec_frames;
  for (int b = 0; b < time_pool_blocks; ++b) t = (t + 1) / 2;
  return t;
}

void ModelConfig::validate() const {
  if (channels.empty()) throw ConfigError("model needs at least one conv block");
  for (int c : channels) {
    if (c < 1) throw ConfigError("conv channel counts must be positive");
  }
  if (kernel_size < 1 || kernel_size % 2 == 0) throw ConfigError("kernel size must be odd and positive");
  if (time_pool_blocks < 0 || time_pool_blocks > static_cast<int>(channels.size())) {
    throw ConfigError("time_pool_blocks must lie in [0, number of blocks]");
  }
  if (hidden_units < 1) throw ConfigError("hidden_units must be positive");
  if (num_classes < 1) throw ConfigError("num_classes must be positive");
  if (!(input_scale > 0.0) || !std::isfinite(input_shift)) throw ConfigError("invalid input standardization");
  if (!(final_init_std >= 0.0)) throw ConfigError("final_init_std must be >= 0");
}

namespace {

template <typename T>
ad::Tensor<T> normal_tensor(ad::Shape shape, double stddev, std::mt19937_64& rng) {
  ad::Tensor<T> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& v : t.values) v = static_cast<T>(dist(rng) * stddev);
  return t;
}

template <typename T>
std::size_t bind_slot(const ad::ParameterStore<T>& store, const std::string& name, const ad::Shape& shape) {
  const auto slot = store.find(name);
  if (!slot) throw FormatError("missing parameter '" + name + "'");
  if (store[*slot].value.shape != shape) {
    throw FormatError("parameter '" + name + "' has shape " + ad::shape_string(store[*slot].value.shape) +
                      ", expected " + ad::shape_string(shape));
  }
  return *slot;
}

struct Layout {
  std::vector<ad::Shape> conv_weight, conv_bias;
  ad::Shape fc1_weight, fc1_bias, fc2_weight, fc2_bias;
};

Layout layout_of(const ModelConfig& c) {
  Layout l;
  std::size_t in = 1;
  const auto k = static_cast<std::size_t>(c.kernel_size);
  for (int ch : c.channels) {
    const auto out = static_cast<std::size_t>(ch);
    l.conv_weight.push_back({out, in, k, k});
    l.conv_bias.push_back({out});
    in = out;
  }
  const auto hidden = static_cast<std::size_t>(c.hidden_units);
  const auto classes = static_cast<std::size_t>(c.num_classes);
  l.fc1_weight = {hidden, in};
  l.fc1_bias = {hidden};
  l.fc2_weight = {classes, hidden};
  l.fc2_bias = {classes};
  return l;
}

}  // namespace

template <typename T>
StreamModel<T> StreamModel<T>::create(ad::ParameterStore<T>& store, const std::string& prefix,
                                      const ModelConfig& config, std::mt19937_64& rng) {
  config.validate();
  StreamModel m(store, prefix, config);
  const Layout l = layout_of(config);
  for (std::size_t b = 0; b < l.conv_weight.size(); ++b) {
    const auto& ws = l.conv_weight[b];
    const double fan_in = static_cast<double>(ws[1] * ws[2] * ws[3]);
    const std::string base = prefix + ".F.conv" + std::to_string(b);
    m.conv_weight_.push_back(store.add(base + ".weight", ad::ParamGroup::feature_extractor,
                                       normal_tensor<T>(ws, std::sqrt(2.0 / fan_in), rng)));
    m.conv_bias_.push_back(
        store.add(base + ".bias", ad::ParamGroup::feature_extractor, ad::Tensor<T>(l.conv_bias[b])));
  }
  const double fc1_fan_in = static_cast<double>(l.fc1_weight[1]);
  m.fc1_weight_ = store.add(prefix + ".C.fc1.weight", ad::ParamGroup::classifier,
                            normal_tensor<T>(l.fc1_weight, std::sqrt(2.0 / fc1_fan_in), rng));
  m.fc1_bias_ = store.add(prefix + ".C.fc1.bias", ad::ParamGroup::classifier, ad::Tensor<T>(l.fc1_bias));
  m.fc2_weight_ = store.add(prefix + ".C.fc2.weight", ad::ParamGroup::classifier,
                            normal_tensor<T>(l.fc2_weight, config.final_init_std, rng));
  m.fc2_bias_ = store.add(prefix + ".C.fc2.bias", ad::ParamGroup::classifier, ad::Tensor<T>(l.fc2_bias));
  return m;
}

template <typename T>
StreamModel<T> StreamModel<T>::bind(ad::ParameterStore<T>& store, const std::string& prefix,
                                    const ModelConfig& config) {
  config.validate();
  StreamModel m(store, prefix, config);
  const Layout l = layout_of(config);
  for (std::size_t b = 0; b < l.conv_weight.size(); ++b) {
    const std::string base = prefix + ".F.conv" + std::to_string(b);
    m.conv_weight_.push_back(bind_slot(store, base + ".weight", l.conv_weight[b]));
    m.conv_bias_.push_back(bind_slot(store, base + ".bias", l.conv_bias[b]));
  }
  m.fc1_weight_ = bind_slot(store, prefix + ".C.fc1.weight", l.fc1_weight);
  m.fc1_bias_ = bind_slot(store, prefix + ".C.fc1.bias", l.fc1_bias);
  m.fc2_weight_ = bind_slot(store, prefix + ".C.fc2.weight", l.fc2_weight);
  m.fc2_bias_ = bind_slot(store, prefix + ".C.fc2.bias", l.fc2_bias);
  return m;
}

template <typename T>
typename StreamModel<T>::Attached StreamModel<T>::attach(ad::Graph<T>& graph) const {
  Attached a;
  a.config = &config_;
  for (std::size_t b = 0; b < conv_weight_.size(); ++b) {
    a.conv_weight.push_back(graph.parameter(*store_, conv_weight_[b]));
    a.conv_bias.push_back(graph.parameter(*store_, conv_bias_[b]));
  }
  a.fc1_weight = graph.parameter(*store_, fc1_weight_);
  a.fc1_bias = graph.parameter(*store_, fc1_bias_);
  a.fc2_weight = graph.parameter(*store_, fc2_weight_);
  a.fc2_bias = graph.parameter(*store_, fc2_bias_);
  return a;
}

template <typename T>
std::vector<std::size_t> StreamModel<T>::slots() const {
  std::vector<std::size_t> out;
  for (std::size_t b = 0; b < conv_weight_.size(); ++b) {
    out.push_back(conv_weight_[b]);
    out.push_back(conv_bias_[b]);
  }
  out.insert(out.end(), {fc1_weight_, fc1_bias_, fc2_weight_, fc2_bias_});
  return out;
}

template <typename T>
ad::Var<T> extract_features(ad::Graph<T>& graph, const LogMelSpectrogram& spec,
                            const typename StreamModel<T>::Attached& stream) {
  const ModelConfig& config = *stream.config;
  const std::size_t frames = spec.frames.rows;
  const std::size_t bins = spec.frames.cols;
  if (frames < ModelConfig::kMinFrames) {
    throw ShapeError("feature extractor needs at least " + std::to_string(ModelConfig::kMinFrames) +
                     " spectrogram frames, got " + std::to_string(frames));
  }
  if (bins == 0) throw ShapeError("spectrogram has no frequency bins");
  ad::Tensor<T> input({1, frames, bins});
  for (std::size_t i = 0; i < input.size(); ++i) {
    input.values[i] = static_cast<T>((spec.frames.values[i] - config.input_shift) / config.input_scale);
  }
  ad::Var<T> x = graph.constant(std::move(input));
  for (std::size_t b = 0; b < stream.conv_weight.size(); ++b) {
    x = ad::relu(ad::conv2d(x, stream.conv_weight[b], stream.conv_bias[b]));
    const std::size_t time_pool = static_cast<int>(b) < config.time_pool_blocks ? 2 : 1;
    x = ad::avg_pool2d(x, time_pool, 2);
  }
  // [C, T, F] -> [C, T] -> [T, C]
  return ad::transpose(ad::mean_axis(x, 2));
}

template <typename T>
ad::Var<T> global_pool(ad::Var<T> frame_features) {
  if (frame_features.shape().size() != 2 || frame_features.shape()[0] == 0) {
    throw ShapeError("global_pool expects a non-empty [T, C] map, got " +
                     ad::shape_string(frame_features.shape()));
  }
  return ad::add(ad::max_axis(frame_features, 0), ad::mean_axis(frame_features, 0));
}

template <typename T>
Prediction<T> classify(ad::Var<T> v, const typename StreamModel<T>::Attached& stream) {
  const auto hidden = ad::relu(ad::linear(v, stream.fc1_weight, stream.fc1_bias));
  Prediction<T> p;
  p.logits = ad::linear(hidden, stream.fc2_weight, stream.fc2_bias);
  p.probs = ad::sigmoid(p.logits);
  return p;
}

template <typename T>
ad::Var<T> frame_activations(ad::Var<T> frame_features, const typename StreamModel<T>::Attached& stream) {
  if (frame_features.shape().size() != 2) {
    throw ShapeError("frame_activations expects [T, C], got " + ad::shape_string(frame_features.shape()));
  }
  return classify<T>(frame_features, stream).probs;
}

std::vector<double> ClassActivationMap::column(std::size_t class_index) const {
  std::vector<double> out(activations.rows);
  for (std::size_t t = 0; t < activations.rows; ++t) out[t] = activations(t, class_index);
  return out;
}

template <typename T>
ClassActivationMap to_activation_map(ad::Var<T> activations) {
  if (activations.shape().size() != 2) {
    throw ShapeError("activation map must be [T, L], got " + ad::shape_string(activations.shape()));
  }
  ClassActivationMap map;
  map.activations = FrameMatrix(activations.shape()[0], activations.shape()[1]);
  const auto v = activations.values();
  for (std::size_t i = 0; i < v.size(); ++i) map.activations.values[i] = static_cast<double>(v[i]);
  return map;
}

#define GLAT_INSTANTIATE(T)                                                                      \
  template class StreamModel<T>;                                                                 \
  template ad::Var<T> extract_features(ad::Graph<T>&, const LogMelSpectrogram&,                  \
                                       const StreamModel<T>::Attached&);                          \
  template ad::Var<T> global_pool(ad::Var<T>);                                                   \
  template Prediction<T> classify(ad::Var<T>, const StreamModel<T>::Attached&);                  \
  template ad::Var<T> frame_activations(ad::Var<T>, const StreamModel<T>::Attached&);            \
  template ClassActivationMap to_activation_map(ad::Var<T>);

GLAT_INSTANTIATE(float)
GLAT_INSTANTIATE(double)

#undef GLAT_INSTANTIATE

}  // namespace glat
