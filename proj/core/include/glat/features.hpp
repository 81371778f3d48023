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

#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "glat/audio.hpp"

namespace glat {

/// Dense row-major matrix of doubles, rows are time frames.
struct FrameMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  FrameMatrix() = default;
  FrameMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  [[nodiscard]] double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  [[nodiscard]] double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  [[nodiscard]] std::span<const double> row(std::size_t r) const {
    return {values.data() + r * cols, cols};
  }
};

struct FrontendConfig {
  int sample_rate = 16000;
  int n_fft = 512;
  int win_samples = 512;
  int hop_samples = 160;
  int mel_bins = 64;
  double f_min = 50.0;
  double f_max = 8000.0;
  double log_floor = 1e-10;

  [[nodiscard]] double frame_rate() const { return static_cast<double>(sample_rate) / hop_samples; }
  /// Number of frames for a signal of \p num_samples; zero if too short.
  [[nodiscard]] std::size_t num_frames(std::size_t num_samples) const;
  void validate() const;
};

struct LogMelSpectrogram {
  FrameMatrix frames;  // T_spec x mel_bins, natural log
  double frame_rate = 0.0;
  int hop_samples = 0;
  int win_samples = 0;
  int n_fft = 0;
  int mel_bins = 0;
};

/// In-place iterative radix-2 FFT. Size must be a power of two.
class Fft {
 public:
  explicit Fft(std::size_t n);
  void forward(std::span<std::complex<double>> data) const;
  [[nodiscard]] std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  std::vector<std::complex<double>> twiddles_;
  std::vector<std::size_t> bit_reverse_;
};

std::vector<double> hann_window(int length);

/// Frame-wise |DFT|^2 of the Hann-windowed signal, zero padded to n_fft.
/// Result is T_spec x (n_fft/2 + 1). Throws ShapeError for signals shorter
/// than one window, ConfigError for inconsistent sizes.
FrameMatrix stft_power(std::span<const float> samples, int n_fft, int hop_samples, int win_samples);
FrameMatrix stft_power(const AudioClip& clip, int n_fft, int hop_samples, int win_samples);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular unit-peak filterbank, mel_bins x (n_fft/2 + 1).
FrameMatrix mel_filterbank(int sample_rate, int n_fft, int mel_bins, double f_min, double f_max);

FrameMatrix mel_project(const FrameMatrix& power_spec, int sample_rate, int mel_bins, double f_min,
                        double f_max);
/// Applies a precomputed filterbank (see mel_filterbank).
FrameMatrix mel_project(const FrameMatrix& power_spec, const FrameMatrix& filterbank);

/// ln(max(value, floor)) elementwise.
FrameMatrix log_compress(const FrameMatrix& mel_spec, double floor = 1e-10);

/// Waveform to log-mel with cached window, FFT tables and filterbank.
class LogMelFrontend {
 public:
  explicit LogMelFrontend(FrontendConfig config);

  [[nodiscard]] const FrontendConfig& config() const { return config_; }
  [[nodiscard]] const FrameMatrix& filterbank() const { return filterbank_; }
  [[nodiscard]] LogMelSpectrogram compute(std::span<const float> samples) const;
  [[nodiscard]] LogMelSpectrogram compute(const AudioClip& clip) const;

 private:
  FrontendConfig config_;
  std::vector<double> window_;
  Fft fft_;
  FrameMatrix filterbank_;
};

/// Writes <prefix>.bin (row-major float32) and <prefix>.json (shape header).
void dump_spectrogram(const std::filesystem::path& prefix, const LogMelSpectrogram& spec);
LogMelSpectrogram load_spectrogram(const std::filesystem::path& prefix);

}  // namespace glat
