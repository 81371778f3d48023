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

#include "glat/selector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "glat/errors.hpp"

namespace glat {
namespace {

double snap_to_grid(double seconds) {
  return std::ldexp(std::round(std::ldexp(seconds, kWindowGridBits)), -kWindowGridBits);
}

double snap_down(double seconds) {
  return std::ldexp(std::floor(std::ldexp(seconds, kWindowGridBits)), -kWindowGridBits);
}

}  // namespace

void SelectorConfig::validate(std::size_t num_classes, double clip_seconds) const {
  if (num_clips < 1) throw ConfigError("number of local clips must be >= 1");
  if (static_cast<std::size_t>(num_clips) > num_classes) {
    throw ConfigError("number of local clips (" + std::to_string(num_clips) + ") exceeds class count (" +
                      std::to_string(num_classes) + ")");
  }
  if (!(window_seconds > 0.0)) throw ConfigError("window duration must be positive");
  if (window_seconds > clip_seconds) {
    throw ConfigError("window duration " + std::to_string(window_seconds) + " s exceeds clip duration " +
                      std::to_string(clip_seconds) + " s");
  }
  if (!(frame_rate > 0.0)) throw ConfigError("frame rate must be positive");
}

std::vector<int> select_top_classes(const ClassActivationMap& activations, int n) {
  const std::size_t classes = activations.num_classes();
  if (n < 1 || static_cast<std::size_t>(n) > classes) {
    throw ConfigError("cannot select " + std::to_string(n) + " of " + std::to_string(classes) + " classes");
  }
  if (activations.frames() == 0) throw ShapeError("activation map has no frames");
  std::vector<double> score(classes, 0.0);
  for (std::size_t c = 0; c < classes; ++c) {
    double best = activations.activations(0, c);
    for (std::size_t t = 1; t < activations.frames(); ++t) best = std::max(best, activations.activations(t, c));
    score[c] = best;
  }
  std::vector<int> order(classes);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return score[static_cast<std::size_t>(a)] > score[static_cast<std::size_t>(b)];
  });
  order.resize(static_cast<std::size_t>(n));
  return order;
}

CandidateClip localize_window(std::span<const double> column, const SelectorConfig& config, double clip_seconds) {
  if (column.empty()) throw ShapeError("activation column is empty");
  const double tau = config.window_seconds;
  if (!(tau > 0.0) || tau > clip_seconds) {
    throw ConfigError("window duration must lie in (0, T0]");
  }
  CandidateClip clip;
  const auto peak = std::max_element(column.begin(), column.end());  // first maximum
  clip.center_frame = static_cast<std::size_t>(peak - column.begin());
  clip.score = *peak;
  clip.center_seconds = (static_cast<double>(clip.center_frame) + 0.5) / config.frame_rate;

  double start = snap_to_grid(clip.center_seconds - tau / 2.0);
  if (start + tau > clip_seconds) start = snap_down(clip_seconds - tau);
  if (start < 0.0) start = 0.0;
  clip.start_seconds = start;
  clip.end_seconds = start + tau;
  return clip;
}

void assign_sample_range(CandidateClip& window, double window_seconds, int sample_rate, std::size_t num_samples) {
  const auto length = static_cast<std::size_t>(std::llround(window_seconds * sample_rate));
  if (length > num_samples) throw ShapeError("window longer than the clip");
  auto begin = static_cast<std::size_t>(std::llround(window.start_seconds * sample_rate));
  // Rounding start and length separately can overshoot by one sample.
  begin = std::min(begin, num_samples - length);
  window.sample_begin = begin;
  window.sample_end = begin + length;
}

std::vector<CandidateClip> select_candidates(const ClassActivationMap& activations, const SelectorConfig& config,
                                             double clip_seconds, int sample_rate) {
  config.validate(activations.num_classes(), clip_seconds);
  const auto num_samples = static_cast<std::size_t>(std::llround(clip_seconds * sample_rate));
  std::vector<CandidateClip> out;
  for (int c : select_top_classes(activations, config.num_clips)) {
    const auto column = activations.column(static_cast<std::size_t>(c));
    CandidateClip w = localize_window(column, config, clip_seconds);
    w.class_index = c;
    assign_sample_range(w, config.window_seconds, sample_rate, num_samples);
    out.push_back(w);
  }
  return out;
}

LocalClipBatch extract_subclips(const AudioClip& clip, std::span<const CandidateClip> windows,
                                double window_seconds) {
  LocalClipBatch batch;
  const auto length = static_cast<std::size_t>(std::llround(window_seconds * clip.sample_rate));
  for (CandidateClip w : windows) {
    if (w.sample_end == 0 || w.sample_end - w.sample_begin != length) {
      assign_sample_range(w, window_seconds, clip.sample_rate, clip.samples.size());
    }
    if (w.sample_end > clip.samples.size()) throw ShapeError("window extends past the end of the clip");
    AudioClip segment;
    segment.sample_rate = clip.sample_rate;
    segment.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(w.sample_begin),
                           clip.samples.begin() + static_cast<std::ptrdiff_t>(w.sample_end));
    batch.clips.push_back(std::move(segment));
    batch.windows.push_back(w);
  }
  return batch;
}

}  // namespace glat
