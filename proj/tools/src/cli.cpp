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

#include "glat/cli/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "glat/checkpoint.hpp"
#include "glat/corpus.hpp"
#include "glat/errors.hpp"
#include "glat/manifest.hpp"
#include "glat/metrics.hpp"
#include "glat/selector.hpp"

namespace glat::cli {
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

/// Options shared by every subcommand.
struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  int threads = 1;
};

void add_common(CLI::App& sub, Common& c) {
  sub.add_option("--config", c.config_path, "INI run configuration");
  sub.add_option("--set", c.overrides, "section.key=value override, repeatable");
  sub.add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    int v = 0;
    const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc{} || p != item.data() + item.size()) {
      throw ConfigError(std::string("invalid entry '") + item + "' in " + what);
    }
    out.push_back(v);
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc{} || p != item.data() + item.size()) {
      throw ConfigError(std::string("invalid entry '") + item + "' in " + what);
    }
    out.push_back(v);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text, bool append = false) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

Dataset load_dataset(const std::string& manifest_path, Split split, const RunConfig& config,
                     const LogMelFrontend& frontend) {
  if (manifest_path.empty()) throw ConfigError(std::string("no ") + to_string(split) + " manifest given");
  const auto manifest = read_manifest(manifest_path, split, config.pipeline.model.num_classes);
  return Dataset::from_manifest(manifest, fs::path(manifest_path).parent_path(), frontend);
}

std::string checkpoint_meta(const RunConfig& config, std::int64_t iteration) {
  ordered_json meta;
  meta["iteration"] = iteration;
  meta["mode"] = to_string(config.pipeline.trainer.mode);
  meta["seed"] = config.pipeline.trainer.seed;
  meta["config"] = config.to_ini();
  return meta.dump();
}

struct LoadedModel {
  RunConfig config;
  std::int64_t iteration = 0;
  TwoStreamModel<float> model;
};

LoadedModel load_model(const std::string& path) {
  auto ckpt = ad::load_checkpoint(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ckpt.meta_json);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": checkpoint metadata is not JSON: " + e.what());
  }
  if (!meta.contains("config") || !meta.contains("iteration")) {
    throw FormatError(path + ": checkpoint metadata lacks config or iteration");
  }
  auto config = RunConfig::from_ini(meta["config"].get<std::string>());
  const auto iteration = meta["iteration"].get<std::int64_t>();
  TwoStreamModel<float> model(std::move(ckpt.params), config.pipeline.model);
  return {std::move(config), iteration, std::move(model)};
}

ordered_json parse_json(const std::string& text) { return ordered_json::parse(text); }

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
  Common common;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> train_clips;
  std::optional<int> eval_clips;
};

int cmd_gen_data(const GenDataArgs& a, std::ostream& out) {
  auto config = resolve_config(a.common.config_path, a.common.overrides);
  if (a.seed) config.corpus_seed = *a.seed;
  if (a.train_clips) config.corpus.num_train_clips = *a.train_clips;
  if (a.eval_clips) config.corpus.num_eval_clips = *a.eval_clips;
  const auto corpus = generate_synthetic_corpus(config.corpus, config.corpus_seed);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  corpus.write(dir);
  config.train_manifest = (dir / "train.jsonl").string();
  config.eval_manifest = (dir / "eval.jsonl").string();
  config.pipeline.model.num_classes = config.corpus.num_classes();
  config.save(dir / "config.ini");
  out << "wrote " << config.corpus.num_train_clips << " train and " << config.corpus.num_eval_clips
      << " eval clips to " << dir.string() << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  Common common;
  std::string out;
  std::string train;
  std::string eval;
  std::string mode;
  std::string resume;
  std::optional<std::int64_t> iters;
  std::optional<std::int64_t> eval_every;
  std::optional<std::uint64_t> seed;
  std::optional<int> num_clips;
  std::optional<double> tau;
  std::optional<double> lr;
  std::optional<int> batch;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  auto config = resolve_config(a.common.config_path, a.common.overrides);
  if (!a.train.empty()) config.train_manifest = a.train;
  if (!a.eval.empty()) config.eval_manifest = a.eval;
  if (!a.mode.empty()) config.pipeline.trainer.mode = parse_train_mode(a.mode);
  if (a.iters) config.pipeline.trainer.iterations = *a.iters;
  if (a.eval_every) config.pipeline.trainer.eval_every = *a.eval_every;
  if (a.seed) config.pipeline.trainer.seed = *a.seed;
  if (a.num_clips) config.pipeline.num_clips = *a.num_clips;
  if (a.tau) config.pipeline.window_seconds = *a.tau;
  if (a.lr) config.pipeline.trainer.adam.lr = *a.lr;
  if (a.batch) config.pipeline.trainer.batch_size = *a.batch;
  config.pipeline.trainer.threads = a.common.threads;
  config.output_dir = a.out;
  if (config.pipeline.trainer.iterations < 0) throw ConfigError("iteration budget must be >= 0");

  const LogMelFrontend frontend(config.pipeline.frontend);
  const auto train = load_dataset(config.train_manifest, Split::train, config, frontend);
  std::optional<Dataset> eval;
  if (!config.eval_manifest.empty()) eval = load_dataset(config.eval_manifest, Split::eval, config, frontend);

  const bool with_local = config.pipeline.trainer.mode == TrainMode::glat;
  std::int64_t start = 0;
  std::optional<TwoStreamModel<float>> model;
  if (!a.resume.empty()) {
    auto loaded = load_model(a.resume);
    start = loaded.iteration;
    if (loaded.model.has_local() != with_local) throw ConfigError("checkpoint mode differs from --mode");
    if (start > config.pipeline.trainer.iterations) {
      throw ConfigError("checkpoint is past the iteration budget");
    }
    model.emplace(std::move(loaded.model));
  } else {
    model.emplace(config.pipeline.model, with_local, config.pipeline.trainer.seed);
  }

  const fs::path dir(a.out);
  fs::create_directories(dir / "checkpoints");
  config.save(dir / "config.ini");
  const bool append = !a.resume.empty();
  if (!append) {
    write_text(dir / "log.jsonl", "");
    write_text(dir / "steps.jsonl", "");
  }

  auto save = [&](std::int64_t iteration) {
    const auto meta = checkpoint_meta(config, iteration);
    char name[32];
    std::snprintf(name, sizeof name, "iter_%08lld.ckpt", static_cast<long long>(iteration));
    ad::save_checkpoint(dir / "checkpoints" / name, model->store(), meta);
    ad::save_checkpoint(dir / "model.ckpt", model->store(), meta);
  };

  if (config.pipeline.trainer.iterations == 0) {
    // Validate the setup even when no step is taken.
    Trainer<float> check(config.pipeline, *model, train);
    (void)check;
    save(0);
    out << "wrote initial checkpoint to " << (dir / "model.ckpt").string() << '\n';
    return kExitOk;
  }

  std::string step_lines;
  TrainingObserver observer;
  observer.on_step = [&](std::int64_t it, const LossReport& r) {
    ordered_json j;
    j["iter"] = it + 1;
    j["L_g"] = r.global_loss;
    if (with_local) {
      j["L_l"] = r.local_loss;
    } else {
      j["L_l"] = nullptr;
    }
    j["total"] = r.total;
    step_lines += j.dump();
    step_lines += '\n';
    const auto every = config.pipeline.trainer.eval_every;
    if (every > 0 && (it + 1) % every == 0 && it + 1 != config.pipeline.trainer.iterations) {
      write_text(dir / "steps.jsonl", step_lines, true);
      step_lines.clear();
      if (!eval) save(it + 1);
    }
  };
  observer.on_eval = [&](const EvalRecord& r) {
    write_text(dir / "log.jsonl", r.to_json() + "\n", true);
    if (r.iteration != config.pipeline.trainer.iterations) save(r.iteration);
    out << r.to_json() << '\n';
  };
  const auto run = run_training(config.pipeline, *model, train, eval ? &*eval : nullptr, start, observer);
  write_text(dir / "steps.jsonl", step_lines, true);
  save(run.iterations_done);
  return kExitOk;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  Common common;
  std::string checkpoint;
  std::string eval;
  std::string out;
  std::string csv;
  std::string classes;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  auto loaded = load_model(a.checkpoint);
  auto& config = loaded.config;
  for (const auto& o : a.common.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    config.set(o.substr(0, eq), o.substr(eq + 1));
  }
  if (!a.eval.empty()) config.eval_manifest = a.eval;
  const LogMelFrontend frontend(config.pipeline.frontend);
  const auto data = load_dataset(config.eval_manifest, Split::eval, config, frontend);
  const auto classes = a.classes.empty() ? std::vector<int>{} : parse_int_list(a.classes, "--classes");
  const auto pred = predict(loaded.model, data, config.pipeline, a.common.threads);

  ordered_json report;
  report["checkpoint"] = a.checkpoint;
  report["iteration"] = loaded.iteration;
  report["mode"] = to_string(config.pipeline.trainer.mode);
  report["clips"] = data.size();
  report["L_g"] = pred.global_loss;
  if (pred.has_local) {
    report["L_l"] = pred.local_loss;
  } else {
    report["L_l"] = nullptr;
  }
  ordered_json streams;
  std::string csv = "stream,class,positives,valid,ap,auc,d_prime\n";
  auto add = [&](const char* name, const FrameMatrix& scores) {
    const auto table = evaluate_table(scores, pred.targets, classes);
    streams[name] = parse_json(table.to_json());
    std::istringstream lines(table.to_csv());
    std::string line;
    std::getline(lines, line);  // header
    while (std::getline(lines, line)) csv += std::string(name) + "," + line + "\n";
  };
  add("global", pred.global);
  if (pred.has_local) {
    add("local", pred.local);
    add("fused", pred.fused);
  }
  report["streams"] = std::move(streams);
  write_text(a.out, report.dump(2) + "\n");
  if (!a.csv.empty()) write_text(a.csv, csv);
  const char* headline = pred.has_local ? "fused" : "global";
  out << headline << " mAP " << report["streams"][headline]["mAP"].get<double>() << '\n';
  return kExitOk;
}

// ------------------------------------------------------------ select-clips

struct SelectArgs {
  Common common;
  std::string checkpoint;
  std::string manifest;
  std::string out;
  std::optional<int> num_clips;
  std::optional<double> tau;
};

int cmd_select_clips(const SelectArgs& a, std::ostream& out) {
  auto loaded = load_model(a.checkpoint);
  auto& config = loaded.config;
  if (a.num_clips) config.pipeline.num_clips = *a.num_clips;
  if (a.tau) config.pipeline.window_seconds = *a.tau;
  const std::string path = a.manifest.empty() ? config.eval_manifest : a.manifest;
  if (path.empty()) throw ConfigError("no manifest given");
  const auto manifest = read_manifest(path, Split::eval, config.pipeline.model.num_classes);
  const LogMelFrontend frontend(config.pipeline.frontend);
  const auto data = Dataset::from_manifest(manifest, fs::path(path).parent_path(), frontend);
  const auto selector = config.pipeline.selector();

  std::string lines;
  std::size_t rows = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& ex = data.examples[i];
    ad::Graph<float> graph;
    graph.set_grad_enabled(false);
    const auto stream = loaded.model.global_stream().attach(graph);
    const auto map = to_activation_map(frame_activations(extract_features(graph, ex.spec, stream), stream));
    const auto windows = select_candidates(map, selector, ex.clip.duration_seconds(), ex.clip.sample_rate);
    for (const auto& w : windows) {
      ordered_json j;
      j["clip"] = manifest.entries[i].path;
      j["class"] = w.class_index;
      j["center_frame"] = w.center_frame;
      j["center_s"] = w.center_seconds;
      j["start_s"] = w.start_seconds;
      j["end_s"] = w.end_seconds;
      j["score"] = w.score;
      lines += j.dump();
      lines += '\n';
      ++rows;
    }
  }
  write_text(a.out, lines);
  out << "wrote " << rows << " windows to " << a.out << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------ ablate

struct AblateArgs {
  Common common;
  std::string out;
  std::string train;
  std::string eval;
  std::string num_clips = "1";
  std::string taus = "3";
  std::string classes;
  std::optional<std::int64_t> iters;
  std::optional<std::uint64_t> seed;
  double tolerance = 0.01;
};

int cmd_ablate(const AblateArgs& a, std::ostream& out) {
  auto config = resolve_config(a.common.config_path, a.common.overrides);
  if (!a.train.empty()) config.train_manifest = a.train;
  if (!a.eval.empty()) config.eval_manifest = a.eval;
  if (a.iters) config.pipeline.trainer.iterations = *a.iters;
  if (a.seed) config.pipeline.trainer.seed = *a.seed;
  config.pipeline.trainer.mode = TrainMode::glat;
  config.pipeline.trainer.threads = a.common.threads;
  config.output_dir = a.out;
  const auto ns = a.num_clips.empty() ? std::vector<int>{} : parse_int_list(a.num_clips, "--num-clips");
  const auto taus = a.taus.empty() ? std::vector<double>{} : parse_double_list(a.taus, "--taus");
  if (ns.empty() || taus.empty()) throw UsageError("ablation grid is empty");
  const auto classes = a.classes.empty() ? std::vector<int>{} : parse_int_list(a.classes, "--classes");

  const LogMelFrontend frontend(config.pipeline.frontend);
  const auto train = load_dataset(config.train_manifest, Split::train, config, frontend);
  const auto eval = load_dataset(config.eval_manifest, Split::eval, config, frontend);
  const auto rows = run_ablation(config.pipeline, train, eval, ns, taus, classes);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  config.save(dir / "config.ini");
  std::string lines;
  for (const auto& r : rows) lines += r.to_json() + "\n";
  write_text(dir / "ablation.jsonl", lines);

  ordered_json trends;
  trends["tolerance"] = a.tolerance;
  auto over_n = ordered_json::array();
  for (std::size_t t = 0; t < taus.size(); ++t) {
    std::vector<double> v;
    for (std::size_t n = 0; n < ns.size(); ++n) v.push_back(rows[n * taus.size() + t].mean_ap);
    ordered_json j;
    j["tau"] = taus[t];
    j["mAP"] = v;
    j["non_decreasing_then_plateau"] = non_decreasing_then_plateau(v, a.tolerance);
    over_n.push_back(std::move(j));
  }
  auto over_tau = ordered_json::array();
  for (std::size_t n = 0; n < ns.size(); ++n) {
    std::vector<double> v;
    for (std::size_t t = 0; t < taus.size(); ++t) v.push_back(rows[n * taus.size() + t].mean_ap);
    ordered_json j;
    j["N"] = ns[n];
    j["mAP"] = v;
    j["interior_maximum"] = has_interior_maximum(v);
    over_tau.push_back(std::move(j));
  }
  trends["over_N"] = std::move(over_n);
  trends["over_tau"] = std::move(over_tau);
  write_text(dir / "trends.json", trends.dump(2) + "\n");
  out << "wrote " << rows.size() << " ablation rows to " << (dir / "ablation.jsonl").string() << '\n';
  return kExitOk;
}

}  // namespace

std::string AblationRow::to_json() const {
  ordered_json j;
  j["N"] = num_clips;
  j["tau"] = window_seconds;
  j["iterations"] = iterations;
  j["mAP"] = mean_ap;
  j["mAUC"] = mean_auc;
  j["d_prime"] = d_prime;
  return j.dump();
}

std::vector<AblationRow> run_ablation(const PipelineConfig& base, const Dataset& train, const Dataset& eval,
                                      std::span<const int> num_clips, std::span<const double> window_seconds,
                                      std::span<const int> classes) {
  if (num_clips.empty() || window_seconds.empty()) throw UsageError("ablation grid is empty");
  std::vector<AblationRow> rows;
  for (int n : num_clips) {
    for (double tau : window_seconds) {
      PipelineConfig config = base;
      config.trainer.mode = TrainMode::glat;
      config.num_clips = n;
      config.window_seconds = tau;
      TwoStreamModel<float> model(config.model, true, config.trainer.seed);
      run_training(config, model, train, nullptr);
      const auto pred = predict(model, eval, config, config.trainer.threads);
      const auto table = evaluate_table(pred.fused, pred.targets, classes);
      rows.push_back({n, tau, config.trainer.iterations, table.mean_ap, table.mean_auc, table.mean_d_prime});
    }
  }
  return rows;
}

bool non_decreasing_then_plateau(std::span<const double> values, double tolerance) {
  if (values.empty()) return false;
  const auto peak = static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
  for (std::size_t i = 0; i + 1 <= peak; ++i) {
    if (values[i + 1] < values[i] - tolerance) return false;
  }
  for (std::size_t j = peak + 1; j < values.size(); ++j) {
    if (values[j] < values[peak] - tolerance) return false;
  }
  return true;
}

bool has_interior_maximum(std::span<const double> values) {
  if (values.size() < 3) return false;
  const double best = *std::max_element(values.begin() + 1, values.end() - 1);
  return best > values.front() && best > values.back();
}

RunConfig resolve_config(const std::string& ini_path, const std::vector<std::string>& overrides) {
  RunConfig config = ini_path.empty() ? RunConfig{} : RunConfig::load(ini_path);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    config.set(o.substr(0, eq), o.substr(eq + 1));
  }
  return config;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e) != nullptr) return kExitIo;
  if (dynamic_cast<const NumericalFault*>(&e) != nullptr) return kExitNumerical;
  if (dynamic_cast<const ConfigError*>(&e) != nullptr || dynamic_cast<const UsageError*>(&e) != nullptr ||
      dynamic_cast<const ShapeError*>(&e) != nullptr) {
    return kExitUsage;
  }
  if (dynamic_cast<const fs::filesystem_error*>(&e) != nullptr) return kExitIo;
  return kExitFailure;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"GL-AT audio tagging toolkit"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "write the synthetic corpus and its manifests");
  add_common(*gen_cmd, gen.common);
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "corpus seed");
  gen_cmd->add_option("--train-clips", gen.train_clips, "number of training clips");
  gen_cmd->add_option("--eval-clips", gen.eval_clips, "number of evaluation clips");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train a baseline or GL-AT model");
  add_common(*train_cmd, train.common);
  train_cmd->add_option("--out", train.out, "run directory")->required();
  train_cmd->add_option("--train", train.train, "training manifest");
  train_cmd->add_option("--eval", train.eval, "evaluation manifest");
  train_cmd->add_option("--mode", train.mode, "baseline or glat");
  train_cmd->add_option("--resume", train.resume, "checkpoint to continue from");
  train_cmd->add_option("--iters", train.iters, "total iteration budget");
  train_cmd->add_option("--eval-every", train.eval_every, "evaluation cadence");
  train_cmd->add_option("--seed", train.seed, "training seed");
  train_cmd->add_option("--num-clips", train.num_clips, "local clips per example (N)");
  train_cmd->add_option("--tau", train.tau, "local clip duration in seconds");
  train_cmd->add_option("--lr", train.lr, "Adam learning rate");
  train_cmd->add_option("--batch", train.batch, "batch size");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on a manifest");
  add_common(*eval_cmd, ev.common);
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "model checkpoint")->required();
  eval_cmd->add_option("--eval", ev.eval, "evaluation manifest");
  eval_cmd->add_option("--out", ev.out, "JSON report path")->required();
  eval_cmd->add_option("--csv", ev.csv, "per-class CSV path");
  eval_cmd->add_option("--classes", ev.classes, "comma list of classes to average over");

  SelectArgs sel;
  auto* sel_cmd = app.add_subcommand("select-clips", "emit the local windows chosen for each clip");
  add_common(*sel_cmd, sel.common);
  sel_cmd->add_option("--checkpoint", sel.checkpoint, "model checkpoint")->required();
  sel_cmd->add_option("--manifest", sel.manifest, "manifest to scan");
  sel_cmd->add_option("--out", sel.out, "JSON-lines output path")->required();
  sel_cmd->add_option("--num-clips", sel.num_clips, "windows per clip (N)");
  sel_cmd->add_option("--tau", sel.tau, "window duration in seconds");

  AblateArgs abl;
  auto* abl_cmd = app.add_subcommand("ablate", "train GL-AT over a grid of N and tau");
  add_common(*abl_cmd, abl.common);
  abl_cmd->add_option("--out", abl.out, "output directory")->required();
  abl_cmd->add_option("--train", abl.train, "training manifest");
  abl_cmd->add_option("--eval", abl.eval, "evaluation manifest");
  abl_cmd->add_option("--num-clips", abl.num_clips, "comma list of N values");
  abl_cmd->add_option("--taus", abl.taus, "comma list of tau values in seconds");
  abl_cmd->add_option("--classes", abl.classes, "comma list of classes to average over");
  abl_cmd->add_option("--iters", abl.iters, "iteration budget per cell");
  abl_cmd->add_option("--seed", abl.seed, "training seed");
  abl_cmd->add_option("--trend-tolerance", abl.tolerance, "allowed dip in the N trend");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "glat: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen, out);
    if (*train_cmd) return cmd_train(train, out);
    if (*eval_cmd) return cmd_eval(ev, out);
    if (*sel_cmd) return cmd_select_clips(sel, out);
    if (*abl_cmd) return cmd_ablate(abl, out);
  } catch (const std::exception& e) {
    err << "glat: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kExitUsage;
}

}  // namespace glat::cli
