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

#include <cstddef>
#include <span>
#include <vector>

#include "glat/audio.hpp"
#include "glat/model.hpp"

namespace glat {

struct SelectorConfig {
  int num_clips = 5;            // N
  double window_seconds = 3.0;  // tau
  /// Frames per second of the frame feature map (spectrogram rate divided by
  /// the backbone's time downsampling).
  double frame_rate = 25.0;

  /// Throws ConfigError unless 1 <= N <= num_classes and 0 < tau <= clip_seconds.
  void validate(std::size_t num_classes, double clip_seconds) const;
};

/// One attended sub-clip.
struct CandidateClip {
  int class_index = 0;
  std::size_t center_frame = 0;  // m
  double center_seconds = 0.0;   // (m + 0.5) / frame_rate
  double start_seconds = 0.0;
  double end_seconds = 0.0;
  double score = 0.0;  // max_t S_g^i(t)
  std::size_t sample_begin = 0;
  std::size_t sample_end = 0;
};

/// Equal-length waveform segments and where they came from.
struct LocalClipBatch {
  std::vector<AudioClip> clips;
  std::vector<CandidateClip> windows;
};

/// Window bounds are snapped to this dyadic grid (seconds) before clamping,
/// so widths are exact whenever tau and T0 are representable on it.
inline constexpr int kWindowGridBits = 20;

/// Classes ranked by max-over-time activation, descending; equal scores keep
/// ascending class order. Returns exactly \p n classes.
std::vector<int> select_top_classes(const ClassActivationMap& activations, int n);

/// Window of width tau around the first peak of \p column. Windows running
/// past T0 become [T0 - tau, T0]; windows starting before 0 become [0, tau].
CandidateClip localize_window(std::span<const double> column, const SelectorConfig& config, double clip_seconds);

/// select_top_classes + localize_window for each selected class, with
/// sample ranges filled in for a waveform at \p sample_rate.
std::vector<CandidateClip> select_candidates(const ClassActivationMap& activations, const SelectorConfig& config,
                                             double clip_seconds, int sample_rate);

/// [round(start * S), round(start * S) + round(tau * S)) for each window.
void assign_sample_range(CandidateClip& window, double window_seconds, int sample_rate, std::size_t num_samples);

/// Slices the windows out of \p clip. Every segment has round(tau * S) samples.
LocalClipBatch extract_subclips(const AudioClip& clip, std::span<const CandidateClip> windows,
                                double window_seconds);

}  // namespace glat
