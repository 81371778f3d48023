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
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "glat/config.hpp"
#include "glat/trainer.hpp"

namespace glat::cli {

/// Exit codes of the glat tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumerical = 4;

/// Runs one command line. \p args excludes the program name. Messages go to
/// \p err, nothing is written to \p out unless a command prints a summary.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// One cell of an N x tau sweep.
struct AblationRow {
  int num_clips = 0;
  double window_seconds = 0.0;
  std::int64_t iterations = 0;
  double mean_ap = 0.0;
  double mean_auc = 0.0;
  double d_prime = 0.0;

  [[nodiscard]] std::string to_json() const;
};

/// Trains GL-AT from scratch for every (N, tau) pair, N-major, and scores the
/// fused predictions on \p eval restricted to \p classes (all when empty).
std::vector<AblationRow> run_ablation(const PipelineConfig& base, const Dataset& train, const Dataset& eval,
                                      std::span<const int> num_clips, std::span<const double> window_seconds,
                                      std::span<const int> classes = {});

/// True when \p values rise (allowing dips of at most \p tolerance) up to
/// their first maximum and then stay within \p tolerance of it.
bool non_decreasing_then_plateau(std::span<const double> values, double tolerance);

/// True when some interior value strictly exceeds both end points.
bool has_interior_maximum(std::span<const double> values);

/// Layered configuration: defaults, then the INI file, then "section.key=value"
/// overrides in order.
RunConfig resolve_config(const std::string& ini_path, const std::vector<std::string>& overrides);

/// Maps a library exception to an exit code.
int exit_code_for(const std::exception& e);

}  // namespace glat::cli
