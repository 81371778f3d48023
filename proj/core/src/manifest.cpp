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

#include "glat/manifest.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "glat/errors.hpp"

namespace glat {

const char* to_string(Split split) { return split == Split::train ? "train" : "eval"; }

void DatasetManifest::validate() const {
  if (num_classes <= 0) throw ConfigError("manifest needs a positive class count");
  for (const auto& e : entries) {
    for (int l : e.labels) {
      if (l < 0 || l >= num_classes) {
        throw ConfigError(e.path + ": label " + std::to_string(l) + " outside [0, " +
                          std::to_string(num_classes) + ")");
      }
    }
    for (const auto& ev : e.events) {
      if (ev.class_index < 0 || ev.class_index >= num_classes) {
        throw ConfigError(e.path + ": event class outside label range");
      }
    }
  }
}

std::string serialize_manifest(const DatasetManifest& manifest) {
  std::string out;
  for (const auto& e : manifest.entries) {
    nlohmann::ordered_json record;
    record["path"] = e.path;
    record["labels"] = e.labels;
    auto events = nlohmann::ordered_json::array();
    for (const auto& ev : e.events) {
      nlohmann::ordered_json j;
      j["class"] = ev.class_index;
      j["onset_s"] = ev.onset_s;
      j["offset_s"] = ev.offset_s;
      events.push_back(std::move(j));
    }
    record["events"] = std::move(events);
    out += record.dump();
    out += '\n';
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << serialize_manifest(manifest);
  if (!out) throw IoError("short write to " + path.string());
}

DatasetManifest parse_manifest(const std::string& text, Split split, int num_classes) {
  DatasetManifest manifest;
  manifest.split = split;
  std::istringstream lines(text);
  std::string line;
  int max_label = -1;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ManifestEntry entry;
    try {
      const auto j = nlohmann::json::parse(line);
      entry.path = j.at("path").get<std::string>();
      entry.labels = j.at("labels").get<std::vector<int>>();
      if (j.contains("events")) {
        for (const auto& ev : j.at("events")) {
          entry.events.push_back({ev.at("class").get<int>(), ev.at("onset_s").get<double>(),
                                  ev.at("offset_s").get<double>()});
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    for (int l : entry.labels) max_label = std::max(max_label, l);
    manifest.entries.push_back(std::move(entry));
  }
  manifest.num_classes = num_classes > 0 ? num_classes : max_label + 1;
  manifest.validate();
  return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& path, Split split, int num_classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_manifest(buffer.str(), split, num_classes);
}

}  // namespace glat
