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
#include <vector>

#include "glat/audio.hpp"
#include "glat/manifest.hpp"

namespace glat {

/// Synthetic weak-label corpus. Short classes are transient sounds (tone
/// bursts, click trains, noise bursts, chirps); long classes are sustained
/// sounds (tones, band noise, AM tones, harmonic complexes). Every clip is
/// background noise plus between min_events and max_events planted events of
/// distinct classes.
struct CorpusConfig {
  int num_train_clips = 200;
  int num_eval_clips = 100;
  int num_short_classes = 4;  // at most 4
  int num_long_classes = 4;   // at most 4
  int sample_rate = 16000;
  double clip_seconds = 10.0;
  int min_events = 1;
  int max_events = 3;
  double short_min_seconds = 0.2;
  double short_max_seconds = 0.5;
  double long_min_seconds = 3.0;
  double long_max_seconds = 6.0;
  /// Event-to-background power ratio range, measured over the event span.
  double snr_min_db = -6.0;
  double snr_max_db = 6.0;
  double background_rms = 0.05;

  [[nodiscard]] int num_classes() const { return num_short_classes + num_long_classes; }
  [[nodiscard]] bool is_short_class(int c) const { return c < num_short_classes; }
  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
};

/// Everything needed to render one clip bit-exactly.
struct ClipPlan {
  ManifestEntry entry;
  std::vector<double> event_snr_db;
  std::uint64_t noise_seed = 0;
};

/// The planned corpus. Audio is rendered on demand; rendering is a pure
/// function of (config, seed, split, index).
class SyntheticCorpus {
 public:
  SyntheticCorpus(CorpusConfig config, std::uint64_t seed);

  [[nodiscard]] const CorpusConfig& config() const { return config_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] const DatasetManifest& manifest(Split split) const;
  [[nodiscard]] AudioClip render(Split split, std::size_t index) const;

  /// Writes <dir>/train.jsonl, <dir>/eval.jsonl and the WAV files they reference.
  void write(const std::filesystem::path& dir) const;

 private:
  CorpusConfig config_;
  std::uint64_t seed_;
  DatasetManifest train_;
  DatasetManifest eval_;
  std::vector<ClipPlan> train_plans_;
  std::vector<ClipPlan> eval_plans_;
};

/// Plans a corpus from (config, seed). Throws ConfigError on invalid config.
SyntheticCorpus generate_synthetic_corpus(const CorpusConfig& config, std::uint64_t seed);

}  // namespace glat
