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
#include <string>
#include <vector>

#include "glat/corpus.hpp"
#include "glat/trainer.hpp"

namespace glat {

/// Complete configuration of a command. Stored as INI text:
///
///   [data]      train_manifest, eval_manifest
///   [output]    dir
///   [corpus]    seed, train_clips, eval_clips, short_classes, long_classes, ...
///   [frontend]  sample_rate, n_fft, win_samples, hop_samples, mel_bins, f_min, f_max, log_floor
///   [model]     channels (comma list), kernel_size, time_pool_blocks, hidden_units,
///               num_classes, input_shift, input_scale, final_init_std
///   [selector]  num_clips, window_seconds
///   [train]     mode, batch_size, iterations, eval_every, seed, threads, lr, beta1, beta2, eps
///
/// Every key is optional; missing keys keep their defaults.
struct RunConfig {
  std::string train_manifest;
  std::string eval_manifest;
  std::string output_dir;
  std::uint64_t corpus_seed = 0;
  CorpusConfig corpus;
  PipelineConfig pipeline;

  /// Sets one "section.key" entry. Throws ConfigError for unknown keys or
  /// unparsable values.
  void set(const std::string& dotted_key, const std::string& value);
  [[nodiscard]] std::string get(const std::string& dotted_key) const;
  [[nodiscard]] static std::vector<std::string> keys();

  /// Full snapshot with every key; doubles round-trip exactly.
  [[nodiscard]] std::string to_ini() const;
  static RunConfig from_ini(const std::string& text);

  static RunConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

}  // namespace glat
