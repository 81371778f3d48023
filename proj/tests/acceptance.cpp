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

// Runs the eight acceptance criteria and prints one PASS/FAIL line for each.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "glat/cli/cli.hpp"
#include "glat/config.hpp"
#include "glat/corpus.hpp"
#include "glat/metrics.hpp"
#include "glat/selector.hpp"
#include "glat/trainer.hpp"
#include "support/gradcheck.hpp"
#include "support/metric_oracles.hpp"
#include "support/selector_oracle.hpp"
#include "support/tiny_pipeline.hpp"

using namespace glat;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void note(const std::string& line) {
  std::printf("  %s\n", line.c_str());
  std::fflush(stdout);
}

// ------------------------------------------------------------- desk scale

constexpr std::int64_t kIterations = 1200;
constexpr std::uint64_t kSeeds[] = {1, 2, 3};
const std::vector<int> kShortClasses{0, 1, 2, 3};

/// Reduced frontend and backbone so that every training run fits the CPU
/// budget on one core.
PipelineConfig desk_config(std::uint64_t seed, TrainMode mode, int num_clips, double tau) {
  PipelineConfig c;
  c.frontend.hop_samples = 320;
  c.frontend.mel_bins = 32;
  c.model.channels = {8, 16, 32, 32};
  c.num_clips = num_clips;
  c.window_seconds = tau;
  c.trainer.mode = mode;
  c.trainer.batch_size = 16;
  c.trainer.iterations = kIterations;
  c.trainer.eval_every = 0;
  c.trainer.seed = seed;
  c.trainer.adam.lr = 3e-3;
  return c;
}

struct Corpus {
  Dataset train;
  Dataset eval;
};

const Corpus& corpus_for(std::uint64_t seed) {
  static std::map<std::uint64_t, Corpus> cache;
  auto it = cache.find(seed);
  if (it == cache.end()) {
    const auto corpus = generate_synthetic_corpus(CorpusConfig{}, seed);
    const LogMelFrontend frontend(desk_config(seed, TrainMode::glat, 1, 1.0).frontend);
    it = cache.emplace(seed, Corpus{Dataset::from_corpus(corpus, Split::train, frontend),
                                    Dataset::from_corpus(corpus, Split::eval, frontend)})
             .first;
  }
  return it->second;
}

struct RunResult {
  EvalPredictions pred;
  double seconds = 0.0;

  [[nodiscard]] double map(const FrameMatrix& scores, std::span<const int> classes = {}) const {
    return evaluate_table(scores, pred.targets, classes).mean_ap;
  }
};

/// Trained runs keyed by (seed, mode, N, tau); identical keys give identical
/// runs, so criteria share them.
const RunResult& trained(std::uint64_t seed, TrainMode mode, int num_clips, double tau) {
  static std::map<std::tuple<std::uint64_t, int, int, double>, RunResult> cache;
  const auto key = std::make_tuple(seed, static_cast<int>(mode), num_clips, tau);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  const auto& data = corpus_for(seed);
  const auto config = desk_config(seed, mode, num_clips, tau);
  TwoStreamModel<float> model(config.model, mode == TrainMode::glat, seed);
  Stopwatch clock;
  run_training(config, model, data.train, nullptr);
  RunResult r{predict(model, data.eval, config), clock.seconds()};
  char line[160];
  std::snprintf(line, sizeof line, "trained seed %llu %s N=%d tau=%g in %.0f s", static_cast<unsigned long long>(seed),
                to_string(mode), num_clips, tau, r.seconds);
  note(line);
  return cache.emplace(key, std::move(r)).first->second;
}

// --------------------------------------------------------------- criteria

Outcome gradient_correctness() {
  Stopwatch clock;
  std::map<std::string, std::pair<int, double>> per_op;
  for (const auto& c : oracle::op_gradient_cases(2024, 20)) {
    const auto r = oracle::check_gradients(c.build, c.inputs);
    auto& slot = per_op[c.op];
    ++slot.first;
    slot.second = std::max(slot.second, r.max_rel_error);
  }
  bool ok = true;
  double worst = 0.0;
  int min_cases = 1 << 30;
  for (const auto& [op, s] : per_op) {
    ok = ok && s.first >= 20 && s.second < 1e-4;
    worst = std::max(worst, s.second);
    min_cases = std::min(min_cases, s.first);
  }

  // Full two-stream loss over 24 configurations of N, tau and initialization.
  const auto corpus = generate_synthetic_corpus(oracle::tiny_corpus_config(), 21);
  auto base = oracle::tiny_pipeline_config();
  const LogMelFrontend frontend(base.frontend);
  const auto data = Dataset::from_corpus(corpus, Split::train, frontend);
  const double taus[] = {0.25, 0.5, 1.0, 2.0};
  double loss_worst = 0.0;
  int loss_configs = 0;
  std::size_t probes = 0, skipped = 0;
  for (int n = 1; n <= 3; ++n) {
    for (double tau : taus) {
      for (std::uint64_t s = 0; s < 2; ++s) {
        auto config = base;
        config.num_clips = n;
        config.window_seconds = tau;
        const std::uint64_t seed = 1000 + 97 * static_cast<std::uint64_t>(loss_configs);
        TwoStreamModel<double> model(config.model, true, seed);
        const auto& ex = data.examples[static_cast<std::size_t>(loss_configs) % data.size()];
        const auto r = oracle::check_two_stream_gradients(model, ex, config, 40, seed + s);
        loss_worst = std::max(loss_worst, r.max_rel_error);
        probes += r.checked;
        skipped += r.skipped;
        ok = ok && r.checked == 40;
        ++loss_configs;
      }
    }
  }
  const double elapsed = clock.seconds();
  ok = ok && loss_worst < 1e-4 && loss_configs >= 20 && 4 * skipped <= probes && elapsed < 120.0;
  return {ok, std::to_string(per_op.size()) + " ops x >= " + std::to_string(min_cases) + " configs, max rel " +
                  fmt("%.2e", worst) + "; full loss " + std::to_string(loss_configs) + " configs, max rel " +
                  fmt("%.2e", loss_worst) + " over " + std::to_string(probes) + " entries (" +
                  std::to_string(skipped) + " kink-straddling entries replaced); " + fmt("%.1f s", elapsed)};
}

Outcome selector_contract() {
  Stopwatch clock;
  std::mt19937_64 rng(20240);
  int failures = 0;
  std::string first;
  for (int i = 0; i < 10000; ++i) {
    const auto c = oracle::random_selector_case(rng);
    if (const auto f = oracle::check_selector_invariants(c)) {
      if (failures++ == 0) first = *f;
    }
  }
  const double elapsed = clock.seconds();
  return {failures == 0 && elapsed < 60.0,
          "10000 maps, " + std::to_string(failures) + " violations" + (first.empty() ? "" : " (" + first + ")") +
              "; " + fmt("%.1f s", elapsed)};
}

Outcome clamp_cases() {
  SelectorConfig config;
  config.num_clips = 1;
  config.window_seconds = 3.0;
  config.frame_rate = 25.0;
  auto window_for = [&](double peak_seconds) {
    std::vector<double> column(250, 0.1);
    column[static_cast<std::size_t>(std::lround(peak_seconds * 25.0 - 0.5))] = 0.9;
    return localize_window(column, config, 10.0);
  };
  const auto late = window_for(9.5);
  const auto early = window_for(0.5);
  const bool ok = late.center_seconds == 9.5 && late.start_seconds == 7.0 && late.end_seconds == 10.0 &&
                  early.center_seconds == 0.5 && early.start_seconds == 0.0 && early.end_seconds == 3.0;
  return {ok, "peak 9.5 s -> [" + fmt("%g", late.start_seconds) + ", " + fmt("%g", late.end_seconds) +
                  "], peak 0.5 s -> [" + fmt("%g", early.start_seconds) + ", " + fmt("%g", early.end_seconds) + "]"};
}

Outcome metric_oracles() {
  std::mt19937_64 rng(77);
  double ap_err = 0.0, auc_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto c = oracle::random_ranking_case(rng);
    ap_err = std::max(ap_err, std::abs(*average_precision(c.scores, c.targets) - oracle::brute_force_ap(c.scores, c.targets)));
    auc_err = std::max(auc_err, std::abs(*auc(c.scores, c.targets) - oracle::trapezoidal_auc(c.scores, c.targets)));
  }
  double q_err = 0.0;
  for (int i = 1; i < 2000; ++i) {
    const double p = i / 2000.0;
    q_err = std::max(q_err, std::abs(normal_quantile(p) - oracle::bisection_quantile(p)));
  }
  for (double p : {1e-6, 1e-4, 0.02425, 0.97575, 1.0 - 1e-4, 1.0 - 1e-6}) {
    q_err = std::max(q_err, std::abs(normal_quantile(p) - oracle::bisection_quantile(p)));
  }
  const double d0 = std::abs(d_prime(0.5));
  const bool ok = ap_err <= 1e-9 && auc_err <= 1e-9 && q_err <= 1e-7 && d0 <= 1e-9;
  return {ok, "AP err " + fmt("%.1e", ap_err) + ", AUC err " + fmt("%.1e", auc_err) + ", quantile err " +
                  fmt("%.1e", q_err) + ", |d'(0.5)| " + fmt("%.1e", d0)};
}

Outcome loss_identities() {
  const auto& data = corpus_for(kSeeds[0]);
  const auto config = desk_config(kSeeds[0], TrainMode::glat, 3, 1.0);
  const LogMelFrontend frontend(config.frontend);
  TwoStreamModel<float> model(config.model, true, kSeeds[0]);

  bool additive = true;
  for (std::size_t i = 0; i < 32; ++i) {
    ad::Graph<float> g;
    g.set_grad_enabled(false);
    const auto l = two_stream_loss(g, model, data.train.examples[i], config, frontend);
    additive = additive && l.total.item() == l.global_loss.item() + l.local_loss.item();
  }
  Trainer<float> trainer(config, model, data.train);
  const auto first = trainer.step(0);
  additive = additive && first.total == first.global_loss + first.local_loss;

  const double classes = config.model.num_classes;
  const double ln2 = std::log(2.0);
  const double g_dev = std::abs(first.global_loss / classes - ln2) / ln2;
  const double l_dev = std::abs(first.local_loss / classes - ln2) / ln2;

  ad::Graph<double> g;
  const std::vector<double> y{1.0, 0.0};
  const double hand = ad::bce_loss(g.constant(ad::Tensor<double>({2}, {0.9, 0.1})), std::span<const double>(y)).item();

  const bool ok = additive && g_dev < 0.02 && l_dev < 0.02 && std::abs(hand - 0.2107) < 1e-4;
  return {ok, std::string("additivity ") + (additive ? "exact" : "BROKEN") + ", untrained per-element deviation L_g " +
                  fmt("%.2f%%", 100 * g_dev) + " L_l " + fmt("%.2f%%", 100 * l_dev) + ", BCE hand example " +
                  fmt("%.5f", hand)};
}

Outcome table_analogue() {
  double base_sum = 0.0, fused_sum = 0.0, worst_seconds = 0.0;
  int ordered = 0;
  for (auto seed : kSeeds) {
    const auto& base = trained(seed, TrainMode::baseline, 1, 1.0);
    const auto& glat = trained(seed, TrainMode::glat, 3, 1.0);
    const double b = base.map(base.pred.global);
    const double g = glat.map(glat.pred.global);
    const double l = glat.map(glat.pred.local);
    const double f = glat.map(glat.pred.fused);
    const bool order = l >= g && f >= g && f >= l;
    ordered += order ? 1 : 0;
    base_sum += b;
    fused_sum += f;
    worst_seconds = std::max({worst_seconds, base.seconds, glat.seconds});
    char line[200];
    std::snprintf(line, sizeof line,
                  "seed %llu: baseline %.4f | global-only %.4f local-only %.4f both %.4f | ordering %s",
                  static_cast<unsigned long long>(seed), b, g, l, f, order ? "holds" : "fails");
    note(line);
  }
  const double n = std::size(kSeeds);
  const double advantage = (fused_sum - base_sum) / n;
  note("soft target (fused advantage >= +0.02 mAP): " + fmt("%+.4f", advantage) +
       (advantage >= 0.02 ? " met" : " not met"));
  const bool ok = fused_sum >= base_sum && ordered >= 2 && worst_seconds <= 900.0;
  return {ok, "mean mAP baseline " + fmt("%.4f", base_sum / n) + " vs GL-AT " + fmt("%.4f", fused_sum / n) +
                  ", ordering in " + std::to_string(ordered) + "/3 seeds, slowest run " +
                  fmt("%.0f s", worst_seconds)};
}

Outcome figure_analogue() {
  const std::uint64_t seed = kSeeds[0];
  const std::vector<double> taus{0.25, 0.5, 1.0, 2.0, 5.0, 10.0};
  std::vector<double> tau_map;
  std::string tau_line = "tau sweep (N=3, short classes):";
  for (double tau : taus) {
    const auto& r = trained(seed, TrainMode::glat, 3, tau);
    tau_map.push_back(r.map(r.pred.fused, kShortClasses));
    tau_line += " " + fmt("%g", tau) + "->" + fmt("%.4f", tau_map.back());
  }
  note(tau_line);
  std::vector<double> n_map;
  std::string n_line = "N sweep (tau=1):";
  for (int n = 1; n <= 5; ++n) {
    const auto& r = trained(seed, TrainMode::glat, n, 1.0);
    n_map.push_back(r.map(r.pred.fused));
    n_line += " " + std::to_string(n) + "->" + fmt("%.4f", n_map.back());
  }
  note(n_line);
  const bool interior = cli::has_interior_maximum(tau_map);
  const bool n_ok = n_map.back() >= n_map.front();
  note(std::string("N trend non-decreasing then plateau (tolerance 0.01): ") +
       (cli::non_decreasing_then_plateau(n_map, 0.01) ? "yes" : "no"));
  const auto best = std::max_element(tau_map.begin() + 1, tau_map.end() - 1);
  return {interior && n_ok, std::string("tau interior maximum ") + (interior ? "present" : "absent") + " (best tau " +
                                fmt("%g", taus[static_cast<std::size_t>(best - tau_map.begin())]) + "), mAP(N=5) " +
                                fmt("%.4f", n_map.back()) + (n_ok ? " >= " : " < ") + "mAP(N=1) " +
                                fmt("%.4f", n_map.front())};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

Outcome cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "glat_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);
  RunConfig config;
  config.corpus = oracle::tiny_corpus_config();
  config.pipeline = oracle::tiny_pipeline_config();
  config.corpus_seed = 5;
  config.save(root / "run.ini");

  const fs::path work = root / "work";
  const std::string bin = GLAT_CLI_PATH;
  const std::string ini = (root / "run.ini").string();
  const std::string data = (work / "data").string();
  const std::string flags = " --config " + ini + " --train " + data + "/train.jsonl --eval " + data + "/eval.jsonl";
  const std::vector<std::string> commands{
      "gen-data --config " + ini + " --out " + data,
      "train --threads 1" + flags + " --out " + (work / "glat").string(),
      "train --threads 1 --mode baseline" + flags + " --out " + (work / "baseline").string(),
      "eval --checkpoint " + (work / "glat" / "model.ckpt").string() + " --out " + (work / "eval.json").string() +
          " --csv " + (work / "eval.csv").string(),
      "select-clips --checkpoint " + (work / "glat" / "model.ckpt").string() + " --out " +
          (work / "clips.jsonl").string(),
      "ablate --threads 1 --num-clips 1,2 --taus 0.25,0.5 --iters 3" + flags + " --out " + (work / "ablate").string(),
  };
  std::vector<std::map<std::string, std::string>> trees;
  for (int pass = 0; pass < 2; ++pass) {
    fs::remove_all(work);
    for (const auto& c : commands) {
      const std::string cmd = bin + " " + c + " > " + (root / "cmd.log").string() + " 2>&1";
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return {false, "command failed: glat " + c};
    }
    trees.push_back(tree(work));
  }
  std::size_t differing = 0;
  std::string first;
  for (const auto& [name, bytes] : trees[0]) {
    const auto other = trees[1].find(name);
    if (other == trees[1].end() || other->second != bytes) {
      if (differing++ == 0) first = name;
    }
  }
  const bool ok = differing == 0 && trees[0].size() == trees[1].size() && !trees[0].empty();
  return {ok, std::to_string(commands.size()) + " commands, " + std::to_string(trees[0].size()) + " output files, " +
                  std::to_string(differing) + " differing" + (first.empty() ? "" : " (first: " + first + ")")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"selector contract", selector_contract},
      {"clamp cases", clamp_cases},
      {"metric oracles", metric_oracles},
      {"loss identities", loss_identities},
      {"desk-scale baseline vs GL-AT with stream ablation", table_analogue},
      {"N and tau sweeps", figure_analogue},
      {"CLI determinism", cli_determinism},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty()) {
    selected.resize(criteria.size());
    std::iota(selected.begin(), selected.end(), 1);
  }

  std::vector<std::string> summary;
  bool all = true;
  for (int k : selected) {
    if (k < 1 || k > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "unknown criterion %d\n", k);
      return 2;
    }
    const auto& [name, fn] = criteria[static_cast<std::size_t>(k - 1)];
    std::printf("criterion %d: %s\n", k, name.c_str());
    std::fflush(stdout);
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    summary.push_back(std::string(o.pass ? "PASS" : "FAIL") + " " + std::to_string(k) + " " + name + ": " + o.detail);
    std::printf("%s\n", summary.back().c_str());
    std::fflush(stdout);
  }
  std::printf("\nsummary\n");
  for (const auto& s : summary) std::printf("%s\n", s.c_str());
  return all ? 0 : 1;
}
