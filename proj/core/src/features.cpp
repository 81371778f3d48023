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

#include "glat/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "glat/errors.hpp"

namespace glat {

std::size_t FrontendConfig::num_frames(std::size_t num_samples) const {
  if (num_samples < static_cast<std::size_t>(win_samples)) return 0;
  return 1 + (num_samples - static_cast<std::size_t>(win_samples)) / static_cast<std::size_t>(hop_samples);
}

void FrontendConfig::validate() const {
  if (sample_rate <= 0) throw ConfigError("sample rate must be positive");
  if (n_fft <= 0 || !std::has_single_bit(static_cast<unsigned>(n_fft))) {
    throw ConfigError("n_fft must be a power of two");
  }
  if (win_samples <= 0 || win_samples > n_fft) throw ConfigError("window must satisfy 0 < win <= n_fft");
  if (hop_samples < 1) throw ConfigError("hop must be >= 1");
  if (mel_bins < 1) throw ConfigError("mel_bins must be >= 1");
  if (!(f_min >= 0.0) || !(f_max > f_min)) throw ConfigError("need 0 <= f_min < f_max");
  if (f_max > sample_rate / 2.0) throw ConfigError("f_max exceeds the Nyquist frequency");
  if (!(log_floor > 0.0)) throw ConfigError("log floor must be positive");
}

Fft::Fft(std::size_t n) : n_(n) {
  if (n == 0 || !std::has_single_bit(n)) throw ConfigError("FFT size must be a power of two");
  twiddles_.resize(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    twiddles_[k] = {std::cos(angle), std::sin(angle)};
  }
  bit_reverse_.resize(n);
  const int bits = std::countr_zero(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (int b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
    bit_reverse_[i] = r;
  }
}

void Fft::forward(std::span<std::complex<double>> data) const {
  if (data.size() != n_) throw ShapeError("FFT input has wrong length");
  for (std::size_t i = 0; i < n_; ++i) {
    if (i < bit_reverse_[i]) std::swap(data[i], data[bit_reverse_[i]]);
  }
  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n_ / len;
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const auto w = twiddles_[k * stride];
        const auto odd = w * data[start + k + half];
        data[start + k + half] = data[start + k] - odd;
        data[start + k] += odd;
      }
    }
  }
}

std::vector<double> hann_window(int length) {
  std::vector<double> w(static_cast<std::size_t>(length));
  for (int n = 0; n < length; ++n) {
    w[static_cast<std::size_t>(n)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length);
  }
  return w;
}

namespace {

FrameMatrix stft_with(std::span<const float> samples, int hop, int win, const std::vector<double>& window,
                      const Fft& fft) {
  if (samples.size() < static_cast<std::size_t>(win)) {
    throw ShapeError("signal of " + std::to_string(samples.size()) +
                     " samples is shorter than the " + std::to_string(win) + "-sample window");
  }
  const std::size_t frames = 1 + (samples.size() - static_cast<std::size_t>(win)) / static_cast<std::size_t>(hop);
  const std::size_t n_fft = fft.size();
  const std::size_t bins = n_fft / 2 + 1;
  FrameMatrix out(frames, bins);
  std::vector<std::complex<double>> buffer(n_fft);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t offset = t * static_cast<std::size_t>(hop);
    std::fill(buffer.begin(), buffer.end(), std::complex<double>{});
    for (std::size_t n = 0; n < static_cast<std::size_t>(win); ++n) {
      buffer[n] = window[n] * static_cast<double>(samples[offset + n]);
    }
    fft.forward(buffer);
    for (std::size_t k = 0; k < bins; ++k) out(t, k) = std::norm(buffer[k]);
  }
  return out;
}

}  // namespace

FrameMatrix stft_power(std::span<const float> samples, int n_fft, int hop_samples, int win_samples) {
  if (win_samples <= 0 || win_samples > n_fft) throw ConfigError("window must satisfy 0 < win <= n_fft");
  if (hop_samples < 1) throw ConfigError("hop must be >= 1");
  const Fft fft(static_cast<std::size_t>(n_fft));
  return stft_with(samples, hop_samples, win_samples, hann_window(win_samples), fft);
}

FrameMatrix stft_power(const AudioClip& clip, int n_fft, int hop_samples, int win_samples) {
  return stft_power(clip.samples, n_fft, hop_samples, win_samples);
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

FrameMatrix mel_filterbank(int sample_rate, int n_fft, int mel_bins, double f_min, double f_max) {
  if (f_max > sample_rate / 2.0) throw ConfigError("f_max exceeds the Nyquist frequency");
  if (mel_bins < 1 || !(f_max > f_min) || f_min < 0.0) throw ConfigError("invalid mel band layout");
  const std::size_t bins = static_cast<std::size_t>(n_fft) / 2 + 1;
  const double mel_lo = hz_to_mel(f_min);
  const double mel_hi = hz_to_mel(f_max);
  std::vector<double> edges(static_cast<std::size_t>(mel_bins) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / (mel_bins + 1));
  }
  FrameMatrix fb(static_cast<std::size_t>(mel_bins), bins);
  for (std::size_t m = 0; m < static_cast<std::size_t>(mel_bins); ++m) {
    const double lo = edges[m];
    const double center = edges[m + 1];
    const double hi = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      double w = 0.0;
      if (f > lo && f <= center) {
        w = (f - lo) / (center - lo);
      } else if (f > center && f < hi) {
        w = (hi - f) / (hi - center);
      }
      fb(m, k) = w;
    }
  }
  return fb;
}

FrameMatrix mel_project(const FrameMatrix& power_spec, const FrameMatrix& filterbank) {
  if (power_spec.cols != filterbank.cols) {
    throw ShapeError("power spectrum has " + std::to_string(power_spec.cols) +
                     " bins, filterbank expects " + std::to_string(filterbank.cols));
  }
  FrameMatrix out(power_spec.rows, filterbank.rows);
  for (std::size_t t = 0; t < power_spec.rows; ++t) {
    const auto frame = power_spec.row(t);
    for (std::size_t m = 0; m < filterbank.rows; ++m) {
      const auto weights = filterbank.row(m);
      double acc = 0.0;
      for (std::size_t k = 0; k < frame.size(); ++k) acc += weights[k] * frame[k];
      out(t, m) = acc;
    }
  }
  return out;
}

FrameMatrix mel_project(const FrameMatrix& power_spec, int sample_rate, int mel_bins, double f_min,
                        double f_max) {
  const int n_fft = static_cast<int>((power_spec.cols - 1) * 2);
  return mel_project(power_spec, mel_filterbank(sample_rate, n_fft, mel_bins, f_min, f_max));
}

FrameMatrix log_compress(const FrameMatrix& mel_spec, double floor) {
  FrameMatrix out = mel_spec;
  for (double& v : out.values) v = std::log(std::max(v, floor));
  return out;
}

namespace {

const FrontendConfig& checked(const FrontendConfig& config) {
  config.validate();
  return config;
}

}  // namespace

LogMelFrontend::LogMelFrontend(FrontendConfig config)
    : config_(checked(config)),
      window_(hann_window(config.win_samples)),
      fft_(static_cast<std::size_t>(config.n_fft)),
      filterbank_(mel_filterbank(config.sample_rate, config.n_fft, config.mel_bins, config.f_min,
                                 config.f_max)) {}

LogMelSpectrogram LogMelFrontend::compute(std::span<const float> samples) const {
  LogMelSpectrogram spec;
  spec.frames = log_compress(
      mel_project(stft_with(samples, config_.hop_samples, config_.win_samples, window_, fft_), filterbank_),
      config_.log_floor);
  spec.frame_rate = config_.frame_rate();
  spec.hop_samples = config_.hop_samples;
  spec.win_samples = config_.win_samples;
  spec.n_fft = config_.n_fft;
  spec.mel_bins = config_.mel_bins;
  return spec;
}

LogMelSpectrogram LogMelFrontend::compute(const AudioClip& clip) const {
  if (clip.sample_rate != config_.sample_rate) {
    throw ConfigError("clip sample rate " + std::to_string(clip.sample_rate) +
                      " does not match frontend rate " + std::to_string(config_.sample_rate));
  }
  return compute(std::span<const float>(clip.samples));
}

void dump_spectrogram(const std::filesystem::path& prefix, const LogMelSpectrogram& spec) {
  auto bin_path = prefix;
  bin_path += ".bin";
  auto json_path = prefix;
  json_path += ".json";
  std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
  if (!bin) throw IoError("cannot write " + bin_path.string());
  for (double v : spec.frames.values) {
    const auto f = static_cast<float>(v);
    std::uint32_t raw = 0;
    std::memcpy(&raw, &f, sizeof(raw));
    const char bytes[4] = {static_cast<char>(raw & 0xFF), static_cast<char>((raw >> 8) & 0xFF),
                           static_cast<char>((raw >> 16) & 0xFF), static_cast<char>(raw >> 24)};
    bin.write(bytes, 4);
  }
  nlohmann::ordered_json header;
  header["rows"] = spec.frames.rows;
  header["cols"] = spec.frames.cols;
  header["dtype"] = "float32";
  header["frame_rate"] = spec.frame_rate;
  header["hop_samples"] = spec.hop_samples;
  header["win_samples"] = spec.win_samples;
  header["n_fft"] = spec.n_fft;
  header["mel_bins"] = spec.mel_bins;
  std::ofstream js(json_path, std::ios::trunc);
  if (!js) throw IoError("cannot write " + json_path.string());
  js << header.dump(2) << '\n';
}

LogMelSpectrogram load_spectrogram(const std::filesystem::path& prefix) {
  auto bin_path = prefix;
  bin_path += ".bin";
  auto json_path = prefix;
  json_path += ".json";
  std::ifstream js(json_path);
  if (!js) throw IoError("cannot open " + json_path.string());
  LogMelSpectrogram spec;
  try {
    const auto header = nlohmann::json::parse(js);
    spec.frames = FrameMatrix(header.at("rows").get<std::size_t>(), header.at("cols").get<std::size_t>());
    spec.frame_rate = header.at("frame_rate").get<double>();
    spec.hop_samples = header.at("hop_samples").get<int>();
    spec.win_samples = header.at("win_samples").get<int>();
    spec.n_fft = header.at("n_fft").get<int>();
    spec.mel_bins = header.at("mel_bins").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(json_path.string() + ": " + e.what());
  }
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw IoError("cannot open " + bin_path.string());
  for (double& v : spec.frames.values) {
    unsigned char bytes[4];
    if (!bin.read(reinterpret_cast<char*>(bytes), 4)) throw FormatError(bin_path.string() + ": truncated");
    const std::uint32_t raw = bytes[0] | (bytes[1] << 8) | (bytes[2] << 16) |
                              (static_cast<std::uint32_t>(bytes[3]) << 24);
    float f = 0.0F;
    std::memcpy(&f, &raw, sizeof(f));
    v = f;
  }
  return spec;
}

}  // namespace glat
