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
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace glat {

/// Mono waveform. Samples are amplitudes in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 0;

  [[nodiscard]] double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

/// Clip-level presence flags, one entry per class, each exactly 0 or 1.
struct WeakLabelVector {
  std::vector<std::uint8_t> labels;

  WeakLabelVector() = default;
  explicit WeakLabelVector(std::size_t num_classes) : labels(num_classes, 0) {}

  /// Builds a vector of \p num_classes flags with the given indices set.
  /// Throws ConfigError for indices outside [0, num_classes).
  static WeakLabelVector from_indices(std::span<const int> indices, std::size_t num_classes);

  [[nodiscard]] std::size_t num_classes() const { return labels.size(); }
  [[nodiscard]] std::size_t num_positive() const;
  [[nodiscard]] bool operator[](std::size_t i) const { return labels[i] != 0; }
  [[nodiscard]] std::vector<int> indices() const;
};

/// Reads a RIFF/WAVE file holding 16-bit PCM or 32-bit float samples in one
/// or two channels. Stereo input is averaged down to mono.
/// Throws FormatError on malformed headers and UnsupportedError on other
/// encodings; IoError if the file cannot be opened.
AudioClip read_wav(const std::filesystem::path& path);

/// Writes mono 16-bit little-endian PCM. Samples are clamped to [-1, 1].
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

/// Encodes a clip as an in-memory 16-bit PCM WAVE file.
std::vector<std::uint8_t> encode_wav_pcm16(const AudioClip& clip);

/// Parses an in-memory WAVE file. Same rules as read_wav.
AudioClip decode_wav(std::span<const std::uint8_t> bytes);

/// Rounds every sample to the nearest 16-bit PCM level, exactly as
/// write_wav followed by read_wav would.
void quantize_pcm16(AudioClip& clip);

/// Linear-interpolation resampler. The output has round(T0 * target_rate)
/// samples; matching rates return an identical copy.
AudioClip resample(const AudioClip& clip, int target_rate);

}  // namespace glat
