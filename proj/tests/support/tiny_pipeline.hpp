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
#include <random>

#include "glat/corpus.hpp"
#include "glat/trainer.hpp"
#include "support/gradcheck.hpp"

namespace glat::oracle {

/// Two-second clips, two short and two long classes.
inline CorpusConfig tiny_corpus_config() {
  CorpusConfig c;
  c.num_train_clips = 12;
  c.num_eval_clips = 8;
  c.num_short_classes = 2;
  c.num_long_classes = 2;
  c.clip_seconds = 2.0;
  c.short_min_seconds = 0.2;
  c.short_max_seconds = 0.4;
  c.long_min_seconds = 0.6;
  c.long_max_seconds = 1.2;
  c.max_events = 2;
  return c;
}

inline PipelineConfig tiny_pipeline_config() {
  PipelineConfig p;
  p.frontend.n_fft = 256;
  p.frontend.win_samples = 256;
  p.frontend.hop_samples = 256;
  p.frontend.mel_bins = 16;
  p.model.channels = {3, 4};
  p.model.hidden_units = 6;
  p.model.num_classes = 4;
  p.num_clips = 2;
  p.window_seconds = 0.5;
  p.trainer.batch_size = 4;
  p.trainer.iterations = 10;
  p.trainer.eval_every = 5;
  return p;
}

/// Max relative error between reverse-mode and central-difference gradients
/// of the full two-stream loss L_g + L_l of one example with respect to
/// \p probes randomly chosen parameter entries, holding the selection of the
/// unperturbed forward pass fixed. Biases are first redrawn uniformly in
/// [-0.1, 0.1]; with their zero initialization a pre-activation fed only by
/// dead units is exactly 0, a ReLU kink where central differences average
/// the two one-sided slopes.
inline GradCheckResult check_two_stream_gradients(TwoStreamModel<double>& model, const Example& example,
                                                  const PipelineConfig& config, std::size_t probes,
                                                  std::uint64_t seed, double h = 1e-5,
                                                  double kink_tolerance = 1e-5) {
  const LogMelFrontend frontend(config.frontend);
  auto& store = model.store();
  std::mt19937_64 bias_rng(seed ^ 0x5bd1e995ULL);
  std::uniform_real_distribution<double> bias(-0.1, 0.1);
  for (std::size_t p = 0; p < store.size(); ++p) {
    const auto& name = store[p].name;
    if (name.size() >= 4 && name.compare(name.size() - 4, 4, "bias") == 0) {
      for (auto& v : store[p].value.values) v = bias(bias_rng);
    }
  }
  store.zero_grad();
  std::vector<CandidateClip> windows;
  {
    ad::Graph<double> g;
    auto loss = two_stream_loss(g, model, example, config, frontend);
    windows = loss.outputs.windows;
    g.backward(loss.total);
  }
  const auto eval = [&] {
    ad::Graph<double> g;
    g.set_grad_enabled(false);
    return two_stream_loss(g, model, example, config, frontend, windows).total.item();
  };
  std::vector<std::pair<std::size_t, std::size_t>> entries;
  for (std::size_t p = 0; p < store.size(); ++p) {
    for (std::size_t k = 0; k < store[p].value.size(); ++k) entries.emplace_back(p, k);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(entries.begin(), entries.end(), rng);
  GradCheckResult result;
  for (auto [p, k] : entries) {
    if (result.checked == probes) break;
    auto& v = store[p].value.values[k];
    const double x0 = v;
    auto at = [&](double offset) {
      v = x0 + offset;
      const double f = eval();
      v = x0;
      return f;
    };
    const double up = at(h), down = at(-h), up2 = at(2.0 * h), down2 = at(-2.0 * h);
    const double numeric = (up - down) / (2.0 * h);
    const double five_point = (8.0 * (up - down) - (up2 - down2)) / (12.0 * h);
    // A ReLU or max kink inside [x0 - 2h, x0 + 2h] shows up as disagreement
    // between the two stencils; such entries are replaced by the next one.
    if (relative_error(numeric, five_point) > kink_tolerance) {
      ++result.skipped;
      continue;
    }
    result.max_rel_error = std::max(result.max_rel_error, relative_error(store[p].grad[k], numeric));
    ++result.checked;
  }
  return result;
}

}  // namespace glat::oracle
