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

#include "glat/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "glat/errors.hpp"

namespace glat::ad {
namespace {

constexpr char kMagic[8] = {'G', 'L', 'A', 'T', 'C', 'K', 'P', '1'};
constexpr const char* kFirstMoment = "#adam_m";
constexpr const char* kSecondMoment = "#adam_v";

void put_floats(std::vector<std::uint8_t>& out, std::span<const float> values) {
  for (float f : values) {
    std::uint32_t raw = 0;
    std::memcpy(&raw, &f, sizeof(raw));
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((raw >> (8 * i)) & 0xFF));
  }
}

std::vector<float> get_floats(std::span<const std::uint8_t> payload, std::size_t offset, std::size_t count) {
  if (offset % 4 != 0 || offset > payload.size() || count > (payload.size() - offset) / 4) {
    throw FormatError("checkpoint tensor block outside payload");
  }
  std::vector<float> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint8_t* b = payload.data() + offset + 4 * i;
    const std::uint32_t raw = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                              (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    std::memcpy(&out[i], &raw, sizeof(float));
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ParameterStore<float>& params, const std::string& meta_json) {
  nlohmann::ordered_json index;
  auto& tensors = index["tensors"];
  tensors = nlohmann::ordered_json::object();
  std::vector<std::uint8_t> payload;
  const auto add_block = [&](const std::string& name, const Parameter<float>& p, std::span<const float> data) {
    nlohmann::ordered_json entry;
    entry["shape"] = p.value.shape;
    entry["offset"] = payload.size();
    entry["group"] = to_string(p.group);
    entry["step"] = p.step;
    tensors[name] = std::move(entry);
    put_floats(payload, data);
  };
  for (const auto& p : params) {
    add_block(p.name, p, p.value.values);
    add_block(p.name + kFirstMoment, p, p.first_moment);
    add_block(p.name + kSecondMoment, p, p.second_moment);
  }
  try {
    index["meta"] = nlohmann::ordered_json::parse(meta_json);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("checkpoint meta is not valid JSON: ") + e.what());
  }
  const std::string header = index.dump();
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  const std::uint64_t len = header.size();
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((len >> (8 * i)) & 0xFF));
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw FormatError("not a checkpoint file (bad magic)");
  }
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(bytes[8 + i]) << (8 * i);
  if (len > bytes.size() - 16) throw FormatError("checkpoint index extends past end of file");
  const auto header_bytes = bytes.subspan(16, static_cast<std::size_t>(len));
  const auto payload = bytes.subspan(16 + static_cast<std::size_t>(len));

  Checkpoint ckpt;
  try {
    const auto index = nlohmann::ordered_json::parse(header_bytes.begin(), header_bytes.end());
    const auto& tensors = index.at("tensors");
    for (auto it = tensors.begin(); it != tensors.end(); ++it) {
      const std::string& name = it.key();
      if (name.find('#') != std::string::npos) continue;
      const auto& entry = it.value();
      const auto shape = entry.at("shape").get<Shape>();
      const std::size_t n = numel(shape);
      Tensor<float> value(shape, get_floats(payload, entry.at("offset").get<std::size_t>(), n));
      const std::size_t slot = ckpt.params.add(name, parse_param_group(entry.at("group").get<std::string>()),
                                               std::move(value));
      auto& p = ckpt.params[slot];
      p.step = entry.at("step").get<std::int64_t>();
      const auto& m = tensors.at(name + kFirstMoment);
      const auto& v = tensors.at(name + kSecondMoment);
      p.first_moment = get_floats(payload, m.at("offset").get<std::size_t>(), n);
      p.second_moment = get_floats(payload, v.at("offset").get<std::size_t>(), n);
    }
    ckpt.meta_json = index.contains("meta") ? index.at("meta").dump() : "{}";
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint index: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterStore<float>& params,
                     const std::string& meta_json) {
  const auto bytes = encode_checkpoint(params, meta_json);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace glat::ad
