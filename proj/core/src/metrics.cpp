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

#include "glat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "glat/errors.hpp"

namespace glat {
namespace {

void check_lengths(std::span<const double> scores, std::span<const std::uint8_t> targets) {
  if (scores.size() != targets.size()) {
    throw ShapeError("metric got " + std::to_string(scores.size()) + " scores and " +
                     std::to_string(targets.size()) + " targets");
  }
}

}  // namespace

std::optional<double> average_precision(std::span<const double> scores, std::span<const std::uint8_t> targets) {
  check_lengths(scores, targets);
  const auto positives = static_cast<std::size_t>(std::count_if(targets.begin(), targets.end(),
                                                                [](std::uint8_t t) { return t != 0; }));
  if (positives == 0) return std::nullopt;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (targets[order[rank]] != 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return sum / static_cast<double>(positives);
}

std::optional<double> auc(std::span<const double> scores, std::span<const std::uint8_t> targets) {
  check_lengths(scores, targets);
  std::size_t positives = 0;
  for (auto t : targets) positives += t != 0 ? 1 : 0;
  const std::size_t negatives = targets.size() - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of midranks of the positives; each tie group shares its mean rank.
  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (targets[order[k]] != 0) positive_rank_sum += midrank;
    }
    i = j;
  }
  const double p = static_cast<double>(positives);
  const double n = static_cast<double>(negatives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("normal_quantile needs p in (0, 1)");
  // Acklam's rational approximation (relative error < 1.2e-9).
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double low = 0.02425;
  double x = 0.0;
  if (p < low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double density = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return x - (normal_cdf(x) - p) / density;
}

double d_prime(double auc_value) {
  const double clamped = std::clamp(auc_value, 1e-6, 1.0 - 1e-6);
  return std::numbers::sqrt2 * normal_quantile(clamped);
}

EvaluationTable evaluate_table(const FrameMatrix& scores, const FrameMatrix& targets, std::span<const int> classes) {
  if (scores.rows != targets.rows || scores.cols != targets.cols) {
    throw ShapeError("score matrix " + std::to_string(scores.rows) + "x" + std::to_string(scores.cols) +
                     " vs target matrix " + std::to_string(targets.rows) + "x" + std::to_string(targets.cols));
  }
  std::vector<int> selected(classes.begin(), classes.end());
  if (selected.empty()) {
    selected.resize(scores.cols);
    std::iota(selected.begin(), selected.end(), 0);
  }
  EvaluationTable table;
  std::vector<double> column(scores.rows);
  std::vector<std::uint8_t> truth(scores.rows);
  for (int c : selected) {
    if (c < 0 || static_cast<std::size_t>(c) >= scores.cols) throw ConfigError("class index out of range");
    ClassMetrics m;
    m.class_index = c;
    for (std::size_t e = 0; e < scores.rows; ++e) {
      column[e] = scores(e, static_cast<std::size_t>(c));
      truth[e] = targets(e, static_cast<std::size_t>(c)) != 0.0 ? 1 : 0;
      m.positives += truth[e];
    }
    const auto area = auc(column, truth);
    if (area) {
      m.valid = true;
      m.ap = *average_precision(column, truth);
      m.auc = *area;
      m.d_prime = d_prime(*area);
      table.mean_ap += m.ap;
      table.mean_auc += m.auc;
      table.mean_d_prime += m.d_prime;
      ++table.valid_classes;
    }
    table.per_class.push_back(m);
  }
  if (table.valid_classes > 0) {
    const auto n = static_cast<double>(table.valid_classes);
    table.mean_ap /= n;
    table.mean_auc /= n;
    table.mean_d_prime /= n;
  }
  return table;
}

std::string EvaluationTable::to_json() const {
  nlohmann::ordered_json j;
  j["mAP"] = mean_ap;
  j["mAUC"] = mean_auc;
  j["d_prime"] = mean_d_prime;
  j["valid_classes"] = valid_classes;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& m : per_class) {
    nlohmann::ordered_json r;
    r["class"] = m.class_index;
    r["positives"] = m.positives;
    r["valid"] = m.valid;
    if (m.valid) {
      r["ap"] = m.ap;
      r["auc"] = m.auc;
      r["d_prime"] = m.d_prime;
    }
    rows.push_back(std::move(r));
  }
  j["per_class"] = std::move(rows);
  return j.dump();
}

std::string EvaluationTable::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "class,positives,valid,ap,auc,d_prime\n";
  for (const auto& m : per_class) {
    out << m.class_index << ',' << m.positives << ',' << (m.valid ? 1 : 0) << ',';
    if (m.valid) {
      out << m.ap << ',' << m.auc << ',' << m.d_prime;
    } else {
      out << ",,";
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace glat
