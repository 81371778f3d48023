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

#include "glat/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "glat/errors.hpp"

namespace glat {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

std::int16_t to_pcm16(float x) {
  const double clamped = std::clamp(static_cast<double>(x), -1.0, 1.0);
  const double level = std::round(clamped * 32768.0);
  return static_cast<std::int16_t>(std::clamp(level, -32768.0, 32767.0));
}

}  // namespace

WeakLabelVector WeakLabelVector::from_indices(std::span<const int> indices,
                                              std::size_t num_classes) {
  WeakLabelVector v(num_classes);
  for (int i : indices) {
    if (i < 0 || static_cast<std::size_t>(i) >= num_classes) {
      throw ConfigError("label index " + std::to_string(i) + " outside [0, " +
                        std::to_string(num_classes) + ")");
    }
    v.labels[static_cast<std::size_t>(i)] = 1;
  }
  return v;
}

std::size_t WeakLabelVector::num_positive() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

std::vector<int> WeakLabelVector::indices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

AudioClip decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE")) {
    throw FormatError("missing RIFF/WAVE header");
  }
  bool have_fmt = false;
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  std::span<const std::uint8_t> data;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (size > bytes.size() - body) {
      throw FormatError("chunk extends past end of file");
    }
    if (tag_is(bytes, pos, "fmt ")) {
      if (size < 16) throw FormatError("fmt chunk too short");
      format = read_u16(bytes, body);
      channels = read_u16(bytes, body + 2);
      rate = read_u32(bytes, body + 4);
      bits = read_u16(bytes, body + 14);
      if (format == kFormatExtensible) {
        if (size < 40) throw FormatError("extensible fmt chunk too short");
        format = read_u16(bytes, body + 24);
      }
      have_fmt = true;
    } else if (tag_is(bytes, pos, "data")) {
      data = bytes.subspan(body, size);
      have_data = true;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) throw FormatError("missing fmt chunk");
  if (!have_data) throw FormatError("missing data chunk");
  if (channels == 0 || rate == 0) throw FormatError("zero channels or sample rate");
  if (channels > 2) {
    throw UnsupportedError("only mono and stereo are supported, got " + std::to_string(channels) +
                           " channels");
  }
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !float32) {
    throw UnsupportedError("unsupported encoding: format " + std::to_string(format) + ", " +
                           std::to_string(bits) + " bits");
  }
  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t frames = data.size() / frame_bytes;

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const std::size_t at = f * frame_bytes + ch * bytes_per_sample;
      if (pcm16) {
        acc += static_cast<std::int16_t>(read_u16(data, at)) / 32768.0;
      } else {
        const std::uint32_t raw = read_u32(data, at);
        float value = 0.0F;
        std::memcpy(&value, &raw, sizeof(value));
        if (!std::isfinite(value)) throw FormatError("non-finite float sample");
        acc += std::clamp(static_cast<double>(value), -1.0, 1.0);
      }
    }
    clip.samples[f] = static_cast<float>(acc / channels);
  }
  return clip;
}

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const UnsupportedError& e) {
    throw UnsupportedError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_wav_pcm16(const AudioClip& clip) {
  if (clip.sample_rate <= 0) throw ConfigError("sample rate must be positive");
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_bytes);
  for (float s : clip.samples) put_u16(out, static_cast<std::uint16_t>(to_pcm16(s)));
  return out;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  const auto bytes = encode_wav_pcm16(clip);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

void quantize_pcm16(AudioClip& clip) {
  for (float& s : clip.samples) s = static_cast<float>(to_pcm16(s) / 32768.0);
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw ConfigError("target rate must be positive");
  if (clip.sample_rate <= 0) throw ConfigError("source sample rate must be positive");
  if (target_rate == clip.sample_rate) return clip;

  const std::size_t n_in = clip.samples.size();
  const auto n_out = static_cast<std::size_t>(
      std::llround(static_cast<double>(n_in) * target_rate / clip.sample_rate));
  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(n_out);
  if (n_in == 0) return out;
  const double step = static_cast<double>(clip.sample_rate) / target_rate;
  for (std::size_t j = 0; j < n_out; ++j) {
    const double pos = static_cast<double>(j) * step;
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= n_in) {
      out.samples[j] = clip.samples[n_in - 1];
      continue;
    }
    const double frac = pos - static_cast<double>(i);
    out.samples[j] = static_cast<float>(clip.samples[i] * (1.0 - frac) + clip.samples[i + 1] * frac);
  }
  return out;
}

}  // namespace glat
