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

#include <filesystem>
#include <string>
#include <vector>

namespace glat {

enum class Split { train, eval };

const char* to_string(Split split);

/// Planted event timestamps. Diagnostics only; never handed to training.
struct EventStamp {
  int class_index = 0;
  double onset_s = 0.0;
  double offset_s = 0.0;
};

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory
  std::vector<int> labels;
  std::vector<EventStamp> events;
};

struct DatasetManifest {
  Split split = Split::train;
  int num_classes = 0;
  std::vector<ManifestEntry> entries;

  [[nodiscard]] std::size_t size() const { return entries.size(); }
  /// Throws ConfigError if any label or event class is outside [0, num_classes).
  void validate() const;
};

/// One JSON object per line: {"path", "labels", "events": [{"class", "onset_s", "offset_s"}]}.
std::string serialize_manifest(const DatasetManifest& manifest);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Parses a JSON-lines manifest. \p num_classes of 0 infers it from the
/// largest label index.
DatasetManifest parse_manifest(const std::string& text, Split split, int num_classes);
DatasetManifest read_manifest(const std::filesystem::path& path, Split split, int num_classes = 0);

}  // namespace glat
