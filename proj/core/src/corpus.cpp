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

#include "glat/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>

#include "glat/errors.hpp"

namespace glat {
namespace {

constexpr int kMaxShortClasses = 4;
constexpr int kMaxLongClasses = 4;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

/// RBJ band-pass biquad (constant 0 dB peak gain).
class BandPass {
 public:
  BandPass(double low_hz, double high_hz, int rate) {
    const double center = std::sqrt(low_hz * high_hz);
    const double q = center / (high_hz - low_hz);
    const double w0 = kTwoPi * center / rate;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    b0_ = alpha / a0;
    b2_ = -alpha / a0;
    a1_ = -2.0 * std::cos(w0) / a0;
    a2_ = (1.0 - alpha) / a0;
  }

  double operator()(double x) {
    const double y = b0_ * x + b2_ * x2_ - a1_ * y1_ - a2_ * y2_;
    x2_ = x1_;
    x1_ = x;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double b0_, b2_, a1_, a2_;
  double x1_ = 0, x2_ = 0, y1_ = 0, y2_ = 0;
};

std::vector<double> band_noise(std::size_t n, double low_hz, double high_hz, int rate,
                               std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  BandPass first(low_hz, high_hz, rate);
  BandPass second(low_hz, high_hz, rate);
  std::vector<double> out(n);
  for (auto& v : out) v = second(first(gauss(rng)));
  return out;
}

double hann_envelope(std::size_t i, std::size_t n) {
  if (n < 2) return 1.0;
  return 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n - 1));
}

double ramp_envelope(std::size_t i, std::size_t n, std::size_t ramp) {
  ramp = std::min(ramp, n / 2);
  if (ramp == 0) return 1.0;
  if (i < ramp) return static_cast<double>(i) / ramp;
  if (i >= n - ramp) return static_cast<double>(n - 1 - i) / ramp;
  return 1.0;
}

/// Raw (unnormalized) waveform of one event of prototype \p kind.
/// Prototypes 0-3 are the short families, 4-7 the long ones.
std::vector<double> synthesize_event(int kind, std::size_t n, int rate, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double jitter = 1.0 + 0.06 * (unit(rng) - 0.5);
  const double phase = kTwoPi * unit(rng);
  std::vector<double> x(n, 0.0);
  const auto t = [rate](std::size_t i) { return static_cast<double>(i) / rate; };
  switch (kind) {
    case 0: {  // tone burst
      const double f = 1000.0 * jitter;
      for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(kTwoPi * f * t(i) + phase) * hann_envelope(i, n);
      break;
    }
    case 1: {  // click train
      std::normal_distribution<double> gauss(0.0, 1.0);
      const auto period = static_cast<std::size_t>(0.025 * jitter * rate);
      const double decay = std::exp(-1.0 / (0.002 * rate));
      for (std::size_t start = 0; start < n; start += period) {
        double amp = 1.0;
        for (std::size_t i = start; i < std::min(n, start + period); ++i) {
          x[i] = gauss(rng) * amp;
          amp *= decay;
        }
      }
      break;
    }
    case 2: {  // noise burst
      x = band_noise(n, 5000.0 * jitter, 6500.0 * jitter, rate, rng);
      for (std::size_t i = 0; i < n; ++i) x[i] *= hann_envelope(i, n);
      break;
    }
    case 3: {  // chirp 600 -> 3000 Hz
      const double f0 = 600.0 * jitter;
      const double f1 = 3000.0 * jitter;
      const double dur = static_cast<double>(n) / rate;
      const double k = (f1 - f0) / dur;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = std::sin(kTwoPi * (f0 * t(i) + 0.5 * k * t(i) * t(i)) + phase) * hann_envelope(i, n);
      }
      break;
    }
    case 4: {  // sustained tone with second harmonic
      const double f = 440.0 * jitter;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = std::sin(kTwoPi * f * t(i) + phase) + 0.5 * std::sin(2.0 * kTwoPi * f * t(i));
      }
      break;
    }
    case 5: {  // band noise
      x = band_noise(n, 2000.0 * jitter, 3000.0 * jitter, rate, rng);
      break;
    }
    case 6: {  // amplitude-modulated tone
      const double f = 1800.0 * jitter;
      const double fm = 5.0 * jitter;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = std::sin(kTwoPi * f * t(i) + phase) * (1.0 - 0.8 * 0.5 * (1.0 + std::cos(kTwoPi * fm * t(i))));
      }
      break;
    }
    default: {  // harmonic complex
      const double f0 = 180.0 * jitter;
      for (std::size_t i = 0; i < n; ++i) {
        double v = 0.0;
        for (int h = 1; h <= 5; ++h) v += std::sin(kTwoPi * f0 * h * t(i) + phase * h) / h;
        x[i] = v;
      }
      break;
    }
  }
  if (kind >= kMaxShortClasses) {
    const auto ramp = static_cast<std::size_t>(0.05 * rate);
    for (std::size_t i = 0; i < n; ++i) x[i] *= ramp_envelope(i, n, ramp);
  }
  return x;
}

int prototype_of(const CorpusConfig& config, int class_index) {
  return config.is_short_class(class_index) ? class_index
                                            : kMaxShortClasses + (class_index - config.num_short_classes);
}

std::vector<ClipPlan> plan_split(const CorpusConfig& config, std::uint64_t seed, Split split,
                                 int count) {
  auto rng = make_rng(seed, split == Split::train ? 1 : 2);
  const int num_classes = config.num_classes();
  std::uniform_int_distribution<int> event_count(config.min_events,
                                                 std::min(config.max_events, num_classes));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<int> deck;
  const auto draw_class = [&](const std::vector<int>& taken) {
    for (;;) {
      if (deck.empty()) {
        deck.resize(static_cast<std::size_t>(num_classes));
        for (int c = 0; c < num_classes; ++c) deck[static_cast<std::size_t>(c)] = c;
        std::shuffle(deck.begin(), deck.end(), rng);
      }
      // First deck card not already in this clip.
      for (auto it = deck.begin(); it != deck.end(); ++it) {
        if (std::find(taken.begin(), taken.end(), *it) == taken.end()) {
          const int c = *it;
          deck.erase(it);
          return c;
        }
      }
      deck.clear();
    }
  };

  std::vector<ClipPlan> plans;
  plans.reserve(static_cast<std::size_t>(count));
  for (int index = 0; index < count; ++index) {
    ClipPlan plan;
    char name[64];
    std::snprintf(name, sizeof(name), "audio/%s_%04d.wav", to_string(split), index);
    plan.entry.path = name;
    const int k = event_count(rng);
    std::vector<int> classes;
    for (int e = 0; e < k; ++e) classes.push_back(draw_class(classes));
    for (int c : classes) {
      const bool is_short = config.is_short_class(c);
      const double lo = is_short ? config.short_min_seconds : config.long_min_seconds;
      const double hi = is_short ? config.short_max_seconds : config.long_max_seconds;
      const double dur = std::min(lo + (hi - lo) * unit(rng), config.clip_seconds);
      const double onset = (config.clip_seconds - dur) * unit(rng);
      plan.entry.events.push_back({c, onset, onset + dur});
      plan.event_snr_db.push_back(config.snr_min_db +
                                  (config.snr_max_db - config.snr_min_db) * unit(rng));
    }
    plan.entry.labels = classes;
    std::sort(plan.entry.labels.begin(), plan.entry.labels.end());
    plan.noise_seed = rng();
    plans.push_back(std::move(plan));
  }
  return plans;
}

DatasetManifest manifest_of(const std::vector<ClipPlan>& plans, Split split, int num_classes) {
  DatasetManifest m;
  m.split = split;
  m.num_classes = num_classes;
  for (const auto& p : plans) m.entries.push_back(p.entry);
  return m;
}

}  // namespace

void CorpusConfig::validate() const {
  if (num_short_classes < 0 || num_short_classes > kMaxShortClasses || num_long_classes < 0 ||
      num_long_classes > kMaxLongClasses || num_classes() < 1) {
    throw ConfigError("class counts must satisfy 0 <= short <= 4, 0 <= long <= 4, total >= 1");
  }
  if (num_train_clips < 0 || num_eval_clips < 0) throw ConfigError("clip counts must be >= 0");
  if (sample_rate <= 0) throw ConfigError("sample rate must be positive");
  if (!(clip_seconds > 0.0)) throw ConfigError("clip duration must be positive");
  if (min_events < 1 || max_events < min_events) {
    throw ConfigError("events per clip must satisfy 1 <= min_events <= max_events");
  }
  if (!std::isfinite(snr_min_db) || !std::isfinite(snr_max_db) || snr_min_db > snr_max_db ||
      snr_min_db < -40.0 || snr_max_db > 60.0) {
    throw ConfigError("SNR range must be finite, ordered and within [-40, 60] dB");
  }
  if (!(background_rms > 0.0) || background_rms > 0.5) {
    throw ConfigError("background rms must lie in (0, 0.5]");
  }
  if (!(short_min_seconds > 0.0) || short_max_seconds < short_min_seconds ||
      !(long_min_seconds > 0.0) || long_max_seconds < long_min_seconds) {
    throw ConfigError("event duration ranges must be positive and ordered");
  }
}

SyntheticCorpus::SyntheticCorpus(CorpusConfig config, std::uint64_t seed)
    : config_(config), seed_(seed) {
  config_.validate();
  train_plans_ = plan_split(config_, seed_, Split::train, config_.num_train_clips);
  eval_plans_ = plan_split(config_, seed_, Split::eval, config_.num_eval_clips);
  train_ = manifest_of(train_plans_, Split::train, config_.num_classes());
  eval_ = manifest_of(eval_plans_, Split::eval, config_.num_classes());
}

const DatasetManifest& SyntheticCorpus::manifest(Split split) const {
  return split == Split::train ? train_ : eval_;
}

AudioClip SyntheticCorpus::render(Split split, std::size_t index) const {
  const auto& plans = split == Split::train ? train_plans_ : eval_plans_;
  const ClipPlan& plan = plans.at(index);
  const int rate = config_.sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(config_.clip_seconds * rate));

  auto rng = make_rng(plan.noise_seed, 0);
  std::normal_distribution<double> gauss(0.0, config_.background_rms);
  std::vector<double> mix(n);
  for (auto& v : mix) v = gauss(rng);

  for (std::size_t e = 0; e < plan.entry.events.size(); ++e) {
    const auto& ev = plan.entry.events[e];
    const auto begin = static_cast<std::size_t>(std::llround(ev.onset_s * rate));
    const auto end = std::min(n, static_cast<std::size_t>(std::llround(ev.offset_s * rate)));
    if (end <= begin) continue;
    auto wave = synthesize_event(prototype_of(config_, ev.class_index), end - begin, rate, rng);
    double energy = 0.0;
    for (double v : wave) energy += v * v;
    const double rms = std::sqrt(energy / static_cast<double>(wave.size()));
    if (rms <= 0.0) continue;
    const double target = config_.background_rms * std::pow(10.0, plan.event_snr_db[e] / 20.0);
    for (std::size_t i = 0; i < wave.size(); ++i) mix[begin + i] += wave[i] * target / rms;
  }

  double peak = 0.0;
  for (double v : mix) peak = std::max(peak, std::abs(v));
  const double gain = peak > 0.99 ? 0.99 / peak : 1.0;

  AudioClip clip;
  clip.sample_rate = rate;
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) clip.samples[i] = static_cast<float>(mix[i] * gain);
  quantize_pcm16(clip);
  return clip;
}

void SyntheticCorpus::write(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir / "audio", ec);
  if (ec) throw IoError("cannot create " + (dir / "audio").string() + ": " + ec.message());
  for (Split split : {Split::train, Split::eval}) {
    const auto& m = manifest(split);
    for (std::size_t i = 0; i < m.size(); ++i) write_wav(dir / m.entries[i].path, render(split, i));
    write_manifest(dir / (std::string(to_string(split)) + ".jsonl"), m);
  }
}

SyntheticCorpus generate_synthetic_corpus(const CorpusConfig& config, std::uint64_t seed) {
  return SyntheticCorpus(config, seed);
}

}  // namespace glat
