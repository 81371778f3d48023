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
#include <span>
#include <string>
#include <vector>

#include "glat/autodiff.hpp"

namespace glat::ad {

/// Checkpoint container layout:
///   8 bytes   magic "GLATCKP1"
///   8 bytes   little-endian u64 length of the JSON index
///   N bytes   JSON index {"tensors": {name: {"shape", "offset", "group", "step"}}, "meta": ...}
///   payload   little-endian float32 blocks; offsets are relative to payload start
/// Each parameter contributes three entries: its value and, under the names
/// "<name>#adam_m" and "<name>#adam_v", its Adam moments.
struct Checkpoint {
  ParameterStore<float> params;
  /// Free-form JSON object serialized as text (iteration, config, ...).
  std::string meta_json = "{}";
};

std::vector<std::uint8_t> encode_checkpoint(const ParameterStore<float>& params, const std::string& meta_json);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const ParameterStore<float>& params,
                     const std::string& meta_json = "{}");
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace glat::ad
