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

#include "glat/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "glat/errors.hpp"

namespace glat {

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

template <typename N>
N parse_number(const std::string& key, const std::string& text) {
  N value{};
  const char* first = text.data();
  const char* last = first + text.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ConfigError("invalid value '" + text + "' for " + key);
  }
  return value;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError("empty entry in " + key);
    out.push_back(parse_number<int>(key, item.substr(b, e - b + 1)));
  }
  if (out.empty()) throw ConfigError(key + " must not be empty");
  return out;
}

std::string format_int_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string& key, const std::string&)> set;
};

template <typename N, typename Access>
Field number_field(Access access) {
  return {[access](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<N>) {
              return format_double(access(const_cast<RunConfig&>(c)));
            } else {
              return std::to_string(access(const_cast<RunConfig&>(c)));
            }
          },
          [access](RunConfig& c, const std::string& key, const std::string& v) {
            access(c) = parse_number<N>(key, v);
          }};
}

template <typename Access>
Field string_field(Access access) {
  return {[access](const RunConfig& c) { return access(const_cast<RunConfig&>(c)); },
          [access](RunConfig& c, const std::string&, const std::string& v) { access(c) = v; }};
}

#define GLAT_FIELD(type, expr) number_field<type>([](RunConfig& c) -> type& { return expr; })
#define GLAT_STRING(expr) string_field([](RunConfig& c) -> std::string& { return expr; })

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"data.train_manifest", GLAT_STRING(c.train_manifest)},
      {"data.eval_manifest", GLAT_STRING(c.eval_manifest)},
      {"output.dir", GLAT_STRING(c.output_dir)},
      {"corpus.seed", GLAT_FIELD(std::uint64_t, c.corpus_seed)},
      {"corpus.train_clips", GLAT_FIELD(int, c.corpus.num_train_clips)},
      {"corpus.eval_clips", GLAT_FIELD(int, c.corpus.num_eval_clips)},
      {"corpus.short_classes", GLAT_FIELD(int, c.corpus.num_short_classes)},
      {"corpus.long_classes", GLAT_FIELD(int, c.corpus.num_long_classes)},
      {"corpus.sample_rate", GLAT_FIELD(int, c.corpus.sample_rate)},
      {"corpus.clip_seconds", GLAT_FIELD(double, c.corpus.clip_seconds)},
      {"corpus.min_events", GLAT_FIELD(int, c.corpus.min_events)},
      {"corpus.max_events", GLAT_FIELD(int, c.corpus.max_events)},
      {"corpus.short_min_seconds", GLAT_FIELD(double, c.corpus.short_min_seconds)},
      {"corpus.short_max_seconds", GLAT_FIELD(double, c.corpus.short_max_seconds)},
      {"corpus.long_min_seconds", GLAT_FIELD(double, c.corpus.long_min_seconds)},
      {"corpus.long_max_seconds", GLAT_FIELD(double, c.corpus.long_max_seconds)},
      {"corpus.snr_min_db", GLAT_FIELD(double, c.corpus.snr_min_db)},
      {"corpus.snr_max_db", GLAT_FIELD(double, c.corpus.snr_max_db)},
      {"corpus.background_rms", GLAT_FIELD(double, c.corpus.background_rms)},
      {"frontend.sample_rate", GLAT_FIELD(int, c.pipeline.frontend.sample_rate)},
      {"frontend.n_fft", GLAT_FIELD(int, c.pipeline.frontend.n_fft)},
      {"frontend.win_samples", GLAT_FIELD(int, c.pipeline.frontend.win_samples)},
      {"frontend.hop_samples", GLAT_FIELD(int, c.pipeline.frontend.hop_samples)},
      {"frontend.mel_bins", GLAT_FIELD(int, c.pipeline.frontend.mel_bins)},
      {"frontend.f_min", GLAT_FIELD(double, c.pipeline.frontend.f_min)},
      {"frontend.f_max", GLAT_FIELD(double, c.pipeline.frontend.f_max)},
      {"frontend.log_floor", GLAT_FIELD(double, c.pipeline.frontend.log_floor)},
      {"model.channels",
       {[](const RunConfig& c) { return format_int_list(c.pipeline.model.channels); },
        [](RunConfig& c, const std::string& key, const std::string& v) {
          c.pipeline.model.channels = parse_int_list(key, v);
        }}},
      {"model.kernel_size", GLAT_FIELD(int, c.pipeline.model.kernel_size)},
      {"model.time_pool_blocks", GLAT_FIELD(int, c.pipeline.model.time_pool_blocks)},
      {"model.hidden_units", GLAT_FIELD(int, c.pipeline.model.hidden_units)},
      {"model.num_classes", GLAT_FIELD(int, c.pipeline.model.num_classes)},
      {"model.input_shift", GLAT_FIELD(double, c.pipeline.model.input_shift)},
      {"model.input_scale", GLAT_FIELD(double, c.pipeline.model.input_scale)},
      {"model.final_init_std", GLAT_FIELD(double, c.pipeline.model.final_init_std)},
      {"selector.num_clips", GLAT_FIELD(int, c.pipeline.num_clips)},
      {"selector.window_seconds", GLAT_FIELD(double, c.pipeline.window_seconds)},
      {"train.mode",
       {[](const RunConfig& c) { return std::string(to_string(c.pipeline.trainer.mode)); },
        [](RunConfig& c, const std::string&, const std::string& v) {
          c.pipeline.trainer.mode = parse_train_mode(v);
        }}},
      {"train.batch_size", GLAT_FIELD(int, c.pipeline.trainer.batch_size)},
      {"train.iterations", GLAT_FIELD(std::int64_t, c.pipeline.trainer.iterations)},
      {"train.eval_every", GLAT_FIELD(std::int64_t, c.pipeline.trainer.eval_every)},
      {"train.seed", GLAT_FIELD(std::uint64_t, c.pipeline.trainer.seed)},
      {"train.threads", GLAT_FIELD(int, c.pipeline.trainer.threads)},
      {"train.lr", GLAT_FIELD(double, c.pipeline.trainer.adam.lr)},
      {"train.beta1", GLAT_FIELD(double, c.pipeline.trainer.adam.beta1)},
      {"train.beta2", GLAT_FIELD(double, c.pipeline.trainer.adam.beta2)},
      {"train.eps", GLAT_FIELD(double, c.pipeline.trainer.adam.eps)},
  };
  return table;
}

#undef GLAT_FIELD
#undef GLAT_STRING

const Field& find_field(const std::string& key) {
  for (const auto& [name, field] : fields()) {
    if (name == key) return field;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void RunConfig::set(const std::string& dotted_key, const std::string& value) {
  find_field(dotted_key).set(*this, dotted_key, value);
}

std::string RunConfig::get(const std::string& dotted_key) const { return find_field(dotted_key).get(*this); }

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& entry : fields()) out.push_back(entry.first);
  return out;
}

std::string RunConfig::to_ini() const {
  std::string out;
  std::string section;
  for (const auto& [name, field] : fields()) {
    const auto dot = name.find('.');
    const auto sec = name.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out += "\n";
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += name.substr(dot + 1) + " = " + field.get(*this) + "\n";
  }
  return out;
}

RunConfig RunConfig::from_ini(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  RunConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      if (!body.data().empty()) throw ConfigError("config key '" + section + "' is outside any section");
      continue;
    }
    for (const auto& [key, value] : body) config.set(section + "." + key, value.data());
  }
  return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_ini(ss.str());
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write config " + path.string());
  out << to_ini();
  if (!out) throw IoError("failed writing config " + path.string());
}

}  // namespace glat
