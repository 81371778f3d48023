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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glat/features.hpp"

namespace glat {

/// Non-interpolated average precision: mean of precision@k over the ranks of
/// the positives, ranking by score descending and original index ascending.
/// Empty when there are no positives.
std::optional<double> average_precision(std::span<const double> scores, std::span<const std::uint8_t> targets);

/// Mann-Whitney AUC with half credit for tied positive/negative pairs.
/// Empty unless there is at least one positive and one negative.
std::optional<double> auc(std::span<const double> scores, std::span<const std::uint8_t> targets);

/// Standard normal CDF.
double normal_cdf(double x);

/// Inverse standard normal CDF for p in (0, 1): rational approximation
/// followed by one Newton step on normal_cdf.
double normal_quantile(double p);

/// sqrt(2) * Phi^-1(auc), with auc clamped to [1e-6, 1 - 1e-6].
double d_prime(double auc_value);

struct ClassMetrics {
  int class_index = 0;
  std::size_t positives = 0;
  bool valid = false;  // at least one positive and one negative
  double ap = 0.0;
  double auc = 0.0;
  double d_prime = 0.0;
};

/// Per-class metrics and their macro averages over valid classes.
struct EvaluationTable {
  std::vector<ClassMetrics> per_class;
  double mean_ap = 0.0;
  double mean_auc = 0.0;
  double mean_d_prime = 0.0;
  std::size_t valid_classes = 0;

  [[nodiscard]] std::string to_json() const;
  [[nodiscard]] std::string to_csv() const;
};

/// \p scores and \p targets are E x L; targets hold 0/1. \p classes restricts
/// the evaluation to a subset (all classes when empty).
EvaluationTable evaluate_table(const FrameMatrix& scores, const FrameMatrix& targets,
                               std::span<const int> classes = {});

}  // namespace glat
