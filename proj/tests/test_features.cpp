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

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>

#include "glat/errors.hpp"
#include "glat/features.hpp"

using namespace glat;

namespace {

std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc{};
    for (std::size_t t = 0; t < n; ++t) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n);
      acc += x[t] * std::complex<double>(std::cos(a), std::sin(a));
    }
    out[k] = acc;
  }
  return out;
}

std::vector<float> sine(std::size_t n, double freq, double rate, double amp = 0.5) {
  std::vector<float> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = static_cast<float>(amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate));
  }
  return v;
}

}  // namespace

TEST(Fft, MatchesNaiveDft) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (std::size_t n : {1u, 2u, 4u, 8u, 64u, 512u}) {
    std::vector<std::complex<double>> x(n);
    for (auto& v : x) v = {g(rng), g(rng)};
    const auto ref = naive_dft(x);
    Fft fft(n);
    auto y = x;
    fft.forward(y);
    for (std::size_t k = 0; k < n; ++k) EXPECT_LT(std::abs(y[k] - ref[k]), 1e-9 * static_cast<double>(n));
  }
  EXPECT_THROW(Fft(12), ConfigError);
}

TEST(Stft, ZeroClipGivesZeroPower) {
  const std::vector<float> zeros(4000, 0.0f);
  const auto p = stft_power(zeros, 512, 160, 512);
  EXPECT_EQ(p.cols, 257u);
  for (double v : p.values) EXPECT_EQ(v, 0.0);
}

TEST(Stft, BinCenterSinePeaksAtItsBin) {
  const int rate = 16000;
  const int n_fft = 512;
  for (int k0 : {5, 32, 100, 200}) {
    const auto x = sine(8000, static_cast<double>(k0) * rate / n_fft, rate);
    const auto p = stft_power(x, n_fft, 160, 512);
    for (std::size_t r = 0; r < p.rows; ++r) {
      const auto row = p.row(r);
      const auto arg = std::max_element(row.begin(), row.end()) - row.begin();
      ASSERT_EQ(arg, k0) << "frame " << r;
    }
  }
}

TEST(Stft, DoublingAmplitudeQuadruplesPower) {
  const auto x = sine(3000, 440.0, 16000, 0.2);
  auto x2 = x;
  for (auto& v : x2) v *= 2.0f;
  const auto p = stft_power(x, 512, 128, 400);
  const auto p2 = stft_power(x2, 512, 128, 400);
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    EXPECT_NEAR(p2.values[i], 4.0 * p.values[i], 1e-9 * (1.0 + p2.values[i]));
  }
}

TEST(Stft, MatchesDirectWindowedDft) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> x(900);
  for (auto& v : x) v = u(rng);
  const int n_fft = 64, hop = 37, win = 50;
  const auto p = stft_power(x, n_fft, hop, win);
  ASSERT_EQ(p.rows, 1u + (900u - 50u) / 37u);
  for (std::size_t r : {std::size_t{0}, std::size_t{7}, p.rows - 1}) {
    std::vector<std::complex<double>> frame(n_fft);
    for (int i = 0; i < win; ++i) {
      const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / win);
      frame[static_cast<std::size_t>(i)] = w * x[r * hop + static_cast<std::size_t>(i)];
    }
    const auto ref = naive_dft(frame);
    for (std::size_t k = 0; k <= n_fft / 2; ++k) EXPECT_NEAR(p(r, k), std::norm(ref[k]), 1e-9);
  }
}

TEST(Stft, RejectsShortSignals) {
  const std::vector<float> x(100, 0.1f);
  EXPECT_THROW(stft_power(x, 512, 160, 512), ShapeError);
}

TEST(Mel, ScaleFormula) {
  EXPECT_NEAR(hz_to_mel(700.0), 2595.0 * std::log10(2.0), 1e-12);
  EXPECT_EQ(hz_to_mel(0.0), 0.0);
  for (double f : {50.0, 440.0, 3000.0, 8000.0}) EXPECT_NEAR(mel_to_hz(hz_to_mel(f)), f, 1e-9);
}

TEST(Mel, FilterbankShapeAndPeaks) {
  const auto fb = mel_filterbank(16000, 512, 64, 50.0, 8000.0);
  ASSERT_EQ(fb.rows, 64u);
  ASSERT_EQ(fb.cols, 257u);
  for (std::size_t m = 0; m < fb.rows; ++m) {
    const auto row = fb.row(m);
    double peak = 0.0;
    for (double v : row) {
      EXPECT_GE(v, 0.0);
      peak = std::max(peak, v);
    }
    EXPECT_LE(peak, 1.0 + 1e-12);
    EXPECT_GT(peak, 0.0);
  }
  EXPECT_THROW(mel_filterbank(16000, 512, 64, 50.0, 9000.0), ConfigError);
}

TEST(Mel, FlatSpectrumGivesFilterRowSums) {
  const auto fb = mel_filterbank(16000, 512, 40, 0.0, 8000.0);
  FrameMatrix flat(3, 257, 1.0);
  const auto mel = mel_project(flat, fb);
  for (std::size_t m = 0; m < fb.rows; ++m) {
    double sum = 0.0;
    for (double v : fb.row(m)) sum += v;
    for (std::size_t r = 0; r < 3; ++r) EXPECT_NEAR(mel(r, m), sum, 1e-12);
  }
  const auto zero = mel_project(FrameMatrix(2, 257, 0.0), fb);
  for (double v : zero.values) EXPECT_EQ(v, 0.0);
}

TEST(LogCompress, KnownValues) {
  FrameMatrix m(1, 3);
  m(0, 0) = 1.0;
  m(0, 1) = 0.0;
  m(0, 2) = std::numbers::e;
  const auto out = log_compress(m);
  EXPECT_EQ(out(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(out(0, 1), std::log(1e-10));
  EXPECT_DOUBLE_EQ(out(0, 2), 1.0);
}

TEST(Frontend, DefaultTenSecondClipShape) {
  const FrontendConfig config;
  EXPECT_DOUBLE_EQ(config.frame_rate(), 100.0);
  EXPECT_EQ(config.num_frames(160000), 997u);
  const LogMelFrontend frontend(config);
  const auto spec = frontend.compute(AudioClip{std::vector<float>(160000, 0.0f), 16000});
  EXPECT_EQ(spec.frames.rows, 997u);
  EXPECT_EQ(spec.frames.cols, 64u);
  for (double v : spec.frames.values) EXPECT_DOUBLE_EQ(v, std::log(1e-10));
}

TEST(Frontend, FloorBoundsEveryEntry) {
  const LogMelFrontend frontend(FrontendConfig{});
  const auto spec = frontend.compute(sine(16000, 1000.0, 16000.0));
  for (double v : spec.frames.values) {
    ASSERT_TRUE(std::isfinite(v));
    ASSERT_GE(v, std::log(1e-10));
  }
}

TEST(Frontend, RejectsBadConfigs) {
  FrontendConfig c;
  c.f_max = 9000.0;
  EXPECT_THROW(LogMelFrontend{c}, ConfigError);
  c = FrontendConfig{};
  c.n_fft = 500;
  EXPECT_THROW(LogMelFrontend{c}, ConfigError);
  c = FrontendConfig{};
  c.win_samples = 1024;
  EXPECT_THROW(LogMelFrontend{c}, ConfigError);
}

TEST(Frontend, MismatchedRateIsRejected) {
  const LogMelFrontend frontend(FrontendConfig{});
  EXPECT_THROW(frontend.compute(AudioClip{std::vector<float>(8000, 0.0f), 8000}), ConfigError);
}

TEST(Frontend, DumpLoadRoundTrip) {
  const LogMelFrontend frontend(FrontendConfig{});
  const auto spec = frontend.compute(sine(4000, 700.0, 16000.0));
  const auto prefix = std::filesystem::temp_directory_path() / "glat_spec";
  dump_spectrogram(prefix, spec);
  const auto back = load_spectrogram(prefix);
  EXPECT_EQ(back.frames.rows, spec.frames.rows);
  EXPECT_EQ(back.frames.cols, spec.frames.cols);
  EXPECT_EQ(back.hop_samples, spec.hop_samples);
  for (std::size_t i = 0; i < spec.frames.values.size(); ++i) {
    EXPECT_EQ(back.frames.values[i], static_cast<double>(static_cast<float>(spec.frames.values[i])));
  }
  std::filesystem::remove(prefix.string() + ".bin");
  std::filesystem::remove(prefix.string() + ".json");
}
