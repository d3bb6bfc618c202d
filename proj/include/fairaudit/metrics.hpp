/*
 * Copyright 2026 The fairaudit Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fairaudit/error.hpp"

namespace fairaudit {

enum class Metric { kPpv, kSens, kSpec, kFnr, kFpr, kAuroc };

inline constexpr Metric kAllMetrics[] = {Metric::kPpv, Metric::kSens, Metric::kSpec,
                                         Metric::kFnr, Metric::kFpr,  Metric::kAuroc};

inline std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::kPpv: return "PPV";
    case Metric::kSens: return "SENS";
    case Metric::kSpec: return "SPEC";
    case Metric::kFnr: return "FNR";
    case Metric::kFpr: return "FPR";
    case Metric::kAuroc: return "AUROC";
  }
  return "?";
}

inline std::optional<Metric> parse_metric(std::string_view name) {
  std::string upper(name);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (upper == "SENSITIVITY") upper = "SENS";
  if (upper == "SPECIFICITY") upper = "SPEC";
  for (Metric m : kAllMetrics)
    if (metric_name(m) == upper) return m;
  return std::nullopt;
}

inline bool needs_threshold(Metric m) { return m != Metric::kAuroc; }

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

// Rates are nullopt (UNDEFINED) when their denominator is zero.
struct ThresholdMetrics {
  std::optional<double> ppv;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> fnr;
  std::optional<double> fpr;
  double threshold = 0.0;
};

namespace detail {

inline void check_aligned(std::size_t labels, std::size_t scores) {
  if (labels != scores) throw ValidationError("labels and scores differ in length");
  if (labels == 0) throw ValidationError("empty input");
}

inline std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace detail

/// Counts outcomes with the rule "predicted positive iff score >= threshold".
inline ConfusionCounts confusion(std::span<const int> labels, std::span<const double> scores, double threshold) {
  detail::check_aligned(labels.size(), scores.size());
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1) {
      predicted ? ++c.tp : ++c.fn;
    } else {
      predicted ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

inline ThresholdMetrics threshold_metrics(const ConfusionCounts& c, double threshold = 0.0) {
  ThresholdMetrics m;
  m.threshold = threshold;
  m.ppv = detail::ratio(c.tp, c.tp + c.fp);
  m.sensitivity = detail::ratio(c.tp, c.tp + c.fn);
  m.fnr = detail::ratio(c.fn, c.tp + c.fn);
  m.specificity = detail::ratio(c.tn, c.tn + c.fp);
  m.fpr = detail::ratio(c.fp, c.tn + c.fp);
  return m;
}

/// Twice the Mann-Whitney U statistic of the positives, computed from
/// doubled mid-ranks so that ties contribute exactly one half and the
/// result is an integer.
inline std::uint64_t doubled_mann_whitney_u(std::span<const int> labels, std::span<const double> scores,
                                            std::size_t* n_pos = nullptr, std::size_t* n_neg = nullptr) {
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::uint64_t rank_sum2 = 0;
  std::size_t positives = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // Positions i..j-1 share the doubled mid-rank (i+1) + j.
    const std::uint64_t rank2 = static_cast<std::uint64_t>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum2 += rank2;
        ++positives;
      }
    }
    i = j;
  }
  if (n_pos) *n_pos = positives;
  if (n_neg) *n_neg = n - positives;
  const auto p = static_cast<std::uint64_t>(positives);
  return rank_sum2 - p * (p + 1);
}

/// Area under the ROC curve as the Mann-Whitney statistic, ties counted 1/2.
/// Throws StatisticalError when only one class is present.
inline double auroc(std::span<const int> labels, std::span<const double> scores) {
  detail::check_aligned(labels.size(), scores.size());
  std::size_t pos = 0, neg = 0;
  const std::uint64_t u2 = doubled_mann_whitney_u(labels, scores, &pos, &neg);
  if (pos == 0 || neg == 0) throw StatisticalError("AUROC undefined: only one outcome class present");
  return static_cast<double>(u2) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

/// Youden-optimal threshold over the distinct observed scores. Among
/// thresholds with equal J the smallest one is returned.
inline double youden_threshold(std::span<const int> labels, std::span<const double> scores) {
  detail::check_aligned(labels.size(), scores.size());
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::int64_t positives = 0;
  for (int l : labels) positives += (l == 1);
  const std::int64_t negatives = static_cast<std::int64_t>(n) - positives;
  if (positives == 0 || negatives == 0) throw StatisticalError("Youden threshold undefined: only one outcome class present");

  // J * P * N = tp * N - fp * P, compared in exact integer arithmetic.
  std::int64_t tp = 0, fp = 0;
  std::int64_t best = 0;
  double best_t = 0.0;
  bool have = false;
  std::size_t i = 0;
  while (i < n) {
    const double t = scores[order[i]];
    while (i < n && scores[order[i]] == t) {
      labels[order[i]] == 1 ? ++tp : ++fp;
      ++i;
    }
    const std::int64_t j = tp * negatives - fp * positives;
    if (!have || j >= best) {
      best = j;
      best_t = t;
      have = true;
    }
  }
  return best_t;
}

/// Youden's J at a threshold; test and report helper.
inline double youden_index(std::span<const int> labels, std::span<const double> scores, double threshold) {
  const auto m = threshold_metrics(confusion(labels, scores, threshold), threshold);
  return m.sensitivity.value_or(0.0) + m.specificity.value_or(0.0) - 1.0;
}

struct CalibrationBin {
  double mean_score = 0.0;
  double positive_fraction = 0.0;
  std::size_t count = 0;
  bool operator==(const CalibrationBin&) const = default;
};

struct CalibrationCurve {
  std::vector<CalibrationBin> bins;
  std::size_t n_bins = 10;
  bool operator==(const CalibrationCurve&) const = default;
};

/// Equal-width reliability curve on [0,1]; empty bins are omitted.
inline CalibrationCurve calibration_curve(std::span<const int> labels, std::span<const double> scores,
                                          std::size_t n_bins = 10) {
  if (n_bins < 2) throw ValidationError("calibration needs at least 2 bins");
  detail::check_aligned(labels.size(), scores.size());
  std::vector<double> score_sum(n_bins, 0.0);
  std::vector<std::size_t> positives(n_bins, 0), counts(n_bins, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto b = static_cast<std::size_t>(std::floor(scores[i] * static_cast<double>(n_bins)));
    b = std::min(b, n_bins - 1);
    score_sum[b] += scores[i];
    positives[b] += (labels[i] == 1);
    ++counts[b];
  }
  CalibrationCurve curve;
  curve.n_bins = n_bins;
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (counts[b] == 0) continue;
    const auto c = static_cast<double>(counts[b]);
    curve.bins.push_back({score_sum[b] / c, static_cast<double>(positives[b]) / c, counts[b]});
  }
  return curve;
}

/// Evaluates one metric on a sample; UNDEFINED (nullopt) when the metric's
/// denominator is empty or, for AUROC, when a class is absent.
inline std::optional<double> metric_value(Metric metric, std::span<const int> labels, std::span<const double> scores,
                                          double threshold) {
  if (metric == Metric::kAuroc) {
    std::size_t pos = 0, neg = 0;
    if (labels.empty()) return std::nullopt;
    const std::uint64_t u2 = doubled_mann_whitney_u(labels, scores, &pos, &neg);
    if (pos == 0 || neg == 0) return std::nullopt;
    return static_cast<double>(u2) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  }
  if (labels.empty()) return std::nullopt;
  const auto m = threshold_metrics(confusion(labels, scores, threshold), threshold);
  switch (metric) {
    case Metric::kPpv: return m.ppv;
    case Metric::kSens: return m.sensitivity;
    case Metric::kSpec: return m.specificity;
    case Metric::kFnr: return m.fnr;
    case Metric::kFpr: return m.fpr;
    case Metric::kAuroc: break;
  }
  return std::nullopt;
}

}  // namespace fairaudit
