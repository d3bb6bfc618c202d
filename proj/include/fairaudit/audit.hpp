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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fairaudit/cohort.hpp"
#include "fairaudit/error.hpp"
#include "fairaudit/matching.hpp"
#include "fairaudit/metrics.hpp"
#include "fairaudit/parallel.hpp"
#include "fairaudit/rng.hpp"
#include "fairaudit/stats.hpp"

namespace fairaudit {

struct ThresholdPolicy {
  // Youden threshold recomputed on each pooled replicate, else `fixed`.
  bool youden_pooled_per_replicate = true;
  double fixed = 0.5;
};

struct AuditConfig {
  std::vector<Metric> metrics{Metric::kPpv, Metric::kSens, Metric::kSpec, Metric::kFnr, Metric::kFpr, Metric::kAuroc};
  std::size_t n_bootstrap = 150;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  ThresholdPolicy threshold;
  std::vector<std::string> attributes;  // empty: every protected column
  std::vector<std::string> propensity_covariates;
  std::optional<double> caliper_multiplier = kDefaultCaliperMultiplier;
  std::size_t min_group_size = 100;
  std::size_t min_matched_n = kDefaultMinMatchedN;
  int rounding = 2;
  std::size_t workers = 0;  // 0: one per hardware thread
  FitOptions fit;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie strictly between 0 and 1");
    if (n_bootstrap < 2) throw ConfigError("n_bootstrap must be at least 2");
    if (metrics.empty()) throw ConfigError("no metrics selected");
    if (rounding < 0 || rounding > 12) throw ConfigError("rounding must be between 0 and 12 decimal places");
    if (caliper_multiplier && !(*caliper_multiplier > 0.0)) throw ConfigError("caliper_multiplier must be positive");
  }

  std::vector<std::string> resolved_attributes(const Cohort& cohort) const {
    std::vector<std::string> out = attributes;
    if (out.empty())
      for (const auto& p : cohort.schema.protected_columns) out.push_back(p.name);
    for (const auto& a : out)
      if (!cohort.schema.protected_index(a)) throw ValidationError("unknown protected attribute '" + a + "'");
    return out;
  }

  bool any_threshold_metric() const {
    return std::any_of(metrics.begin(), metrics.end(), needs_threshold);
  }
};

enum class CellStatus { kOk, kInsufficient, kSkipped, kFailed };

inline std::string_view cell_status_name(CellStatus s) {
  switch (s) {
    case CellStatus::kOk: return "OK";
    case CellStatus::kInsufficient: return "INSUFFICIENT";
    case CellStatus::kSkipped: return "SKIPPED";
    case CellStatus::kFailed: return "FAILED";
  }
  return "?";
}

inline std::optional<CellStatus> parse_cell_status(std::string_view s) {
  for (auto st : {CellStatus::kOk, CellStatus::kInsufficient, CellStatus::kSkipped, CellStatus::kFailed})
    if (cell_status_name(st) == s) return st;
  return std::nullopt;
}

struct SubgroupAuditResult {
  std::string attribute;
  std::string level;
  Metric metric = Metric::kAuroc;
  CellStatus status = CellStatus::kOk;
  double mean_diff = 0.0;   // bootstrap mean of (level metric - attribute average)
  double sd = 0.0;          // bootstrap standard deviation of the diffs
  double mean_value = 0.0;  // bootstrap mean of the level's own metric
  double t_stat = 0.0;
  double p_value = 1.0;
  bool significant = false;
  bool degenerate = false;
  std::size_t n_effective = 0;
  std::string note;

  bool operator==(const SubgroupAuditResult&) const = default;
};

// One level's matched results against every other level, in table order.
struct MatchedAuditResult {
  std::string attribute;
  std::string level;
  Metric metric = Metric::kAuroc;
  std::vector<std::string> opponents;
  std::vector<SubgroupAuditResult> cells;  // aligned with opponents

  bool operator==(const MatchedAuditResult&) const = default;
};

// --- diff-from-average -----------------------------------------------------

/// Per-level difference from the unweighted mean of the defined level values.
/// Returns an empty vector when fewer than two levels are defined.
inline std::vector<std::optional<double>> diffs_from_average(std::span<const std::optional<double>> values) {
  double sum = 0.0;
  std::size_t defined = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++defined;
    }
  }
  if (defined < 2) return {};
  const double average = sum / static_cast<double>(defined);
  std::vector<std::optional<double>> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i]) out[i] = *values[i] - average;
  return out;
}

namespace detail {

// Label/score arrays over the whole cohort for one score column; records
// without that score are left out of `pool`.
struct ScoreView {
  std::vector<int> labels;
  std::vector<double> scores;
  std::vector<std::size_t> pool;
};

inline ScoreView score_view(const Cohort& cohort, std::string_view model) {
  auto s = cohort.schema.score_index(model);
  if (!s) throw ValidationError("unknown model / score column '" + std::string(model) + "'");
  ScoreView v;
  v.labels.resize(cohort.size());
  v.scores.assign(cohort.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto& r = cohort.records[i];
    v.labels[i] = r.label;
    if (r.scores[*s]) {
      v.scores[i] = *r.scores[*s];
      v.pool.push_back(i);
    }
  }
  if (v.pool.empty()) throw ValidationError("model '" + std::string(model) + "' has no scores");
  return v;
}

// Metric values per level for a sample of record indices (repeats allowed).
// Result is indexed [metric][level].
inline std::vector<std::vector<std::optional<double>>> level_metrics(
    std::span<const std::size_t> sample, std::span<const int> membership, std::size_t n_levels,
    const ScoreView& view, std::span<const Metric> metrics, std::optional<double> threshold) {
  std::vector<std::vector<int>> labels(n_levels);
  std::vector<std::vector<double>> scores(n_levels);
  for (auto i : sample) {
    const int g = membership[i];
    if (g < 0) continue;
    labels[static_cast<std::size_t>(g)].push_back(view.labels[i]);
    scores[static_cast<std::size_t>(g)].push_back(view.scores[i]);
  }
  std::vector<std::vector<std::optional<double>>> out(metrics.size(), std::vector<std::optional<double>>(n_levels));
  for (std::size_t g = 0; g < n_levels; ++g) {
    std::optional<ThresholdMetrics> tm;
    if (threshold && !labels[g].empty())
      tm = threshold_metrics(confusion(labels[g], scores[g], *threshold), *threshold);
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      switch (metrics[m]) {
        case Metric::kAuroc: out[m][g] = metric_value(Metric::kAuroc, labels[g], scores[g], 0.0); break;
        case Metric::kPpv: out[m][g] = tm ? tm->ppv : std::nullopt; break;
        case Metric::kSens: out[m][g] = tm ? tm->sensitivity : std::nullopt; break;
        case Metric::kSpec: out[m][g] = tm ? tm->specificity : std::nullopt; break;
        case Metric::kFnr: out[m][g] = tm ? tm->fnr : std::nullopt; break;
        case Metric::kFpr: out[m][g] = tm ? tm->fpr : std::nullopt; break;
      }
    }
  }
  return out;
}

// Pooled decision threshold for a sample; nullopt when the sample is single-class.
inline std::optional<double> sample_threshold(std::span<const std::size_t> sample, const ScoreView& view,
                                              const ThresholdPolicy& policy) {
  if (!policy.youden_pooled_per_replicate) return policy.fixed;
  std::vector<int> labels;
  std::vector<double> scores;
  labels.reserve(sample.size());
  scores.reserve(sample.size());
  bool pos = false, neg = false;
  for (auto i : sample) {
    labels.push_back(view.labels[i]);
    scores.push_back(view.scores[i]);
    (view.labels[i] == 1 ? pos : neg) = true;
  }
  if (!pos || !neg) return std::nullopt;
  return youden_threshold(labels, scores);
}

// Summarizes the defined per-replicate diffs of one cell.
inline void reduce_cell(SubgroupAuditResult& cell, const std::vector<double>& diffs, const std::vector<double>& values,
                        double alpha) {
  cell.n_effective = diffs.size();
  if (diffs.size() < 2) {
    cell.status = CellStatus::kInsufficient;
    cell.note = "fewer than 2 replicates with a defined metric";
    return;
  }
  const auto ms = mean_sd(diffs);
  cell.mean_diff = ms.mean;
  cell.sd = ms.sd;
  cell.mean_value = mean_sd(values).mean;
  const auto t = t_test_one_sample(diffs, 0.0);
  cell.t_stat = t.t_stat;
  cell.p_value = t.p_value;
  cell.degenerate = t.degenerate;
  cell.significant = t.p_value < alpha;
  cell.status = CellStatus::kOk;
}

inline constexpr std::uint64_t kBootstrapStream = 0x62;
inline constexpr std::uint64_t kMatchedStream = 0x6d;

}  // namespace detail

struct LevelDiff {
  std::string level;
  std::optional<double> value;
  std::optional<double> diff;
};

/// Metric per level of `attribute` over `indices` and its difference from
/// the unweighted average of the defined level values. Levels are the
/// attribute's observed levels (plus "NA" when missing values occur).
/// Throws StatisticalError when fewer than two levels have a defined metric.
inline std::vector<LevelDiff> group_diffs(const Cohort& cohort, std::span<const std::size_t> indices,
                                          std::string_view attribute, std::string_view model, Metric metric,
                                          double threshold) {
  auto attr = cohort.schema.protected_index(attribute);
  if (!attr) throw ValidationError("unknown protected attribute '" + std::string(attribute) + "'");
  const auto view = detail::score_view(cohort, model);
  std::vector<std::string> levels = cohort.attribute_levels[*attr];
  std::vector<int> membership(cohort.size(), -1);
  bool has_missing = false;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto& lvl = cohort.records[i].protected_levels[*attr];
    if (!lvl) {
      has_missing = true;
      continue;
    }
    membership[i] = static_cast<int>(std::find(levels.begin(), levels.end(), *lvl) - levels.begin());
  }
  if (has_missing) {
    levels.emplace_back(kMissingLevel);
    for (std::size_t i = 0; i < cohort.size(); ++i)
      if (!cohort.records[i].protected_levels[*attr]) membership[i] = static_cast<int>(levels.size() - 1);
  }
  std::vector<std::size_t> sample;
  for (auto i : indices)
    if (!std::isnan(view.scores[i])) sample.push_back(i);
  const Metric metrics[] = {metric};
  const auto values = detail::level_metrics(sample, membership, levels.size(), view, metrics, threshold)[0];

  std::vector<LevelDiff> out;
  std::vector<std::optional<double>> present_values;
  for (std::size_t g = 0; g < levels.size(); ++g) {
    const bool present = std::any_of(sample.begin(), sample.end(), [&](std::size_t i) { return membership[i] == static_cast<int>(g); });
    if (!present) continue;
    out.push_back({levels[g], values[g], std::nullopt});
    present_values.push_back(values[g]);
  }
  const auto diffs = diffs_from_average(present_values);
  if (diffs.empty()) {
    throw StatisticalError("attribute '" + std::string(attribute) + "', metric " + std::string(metric_name(metric)) +
                           ": fewer than 2 levels with a defined value");
  }
  for (std::size_t g = 0; g < out.size(); ++g) out[g].diff = diffs[g];
  return out;
}

// Per-replicate diffs, kept for invariant checks: [attribute][metric][replicate][level].
struct AuditTrace {
  std::vector<std::string> attributes;
  std::vector<std::vector<std::string>> levels;
  std::vector<std::vector<std::vector<std::vector<std::optional<double>>>>> diffs;
};

struct ExcludedLevel {
  std::string attribute;
  std::string level;
  std::size_t count = 0;
  std::string reason;
  bool operator==(const ExcludedLevel&) const = default;
};

struct BootstrapAuditOutput {
  std::vector<SubgroupAuditResult> results;
  std::vector<ExcludedLevel> excluded;
  std::vector<std::string> notes;
};

namespace detail {

struct AttributeGroups {
  std::string name;
  std::vector<std::string> levels;
  std::vector<int> membership;
};

inline std::vector<AttributeGroups> attribute_groups(const Cohort& cohort, const AuditConfig& config,
                                                     std::vector<ExcludedLevel>* excluded) {
  std::vector<AttributeGroups> out;
  for (const auto& name : config.resolved_attributes(cohort)) {
    const auto part = subgroup_partition(cohort, name, config.min_group_size);
    AttributeGroups g;
    g.name = name;
    for (const auto& grp : part.groups) g.levels.push_back(grp.level);
    g.membership = part.membership(cohort.size());
    if (excluded)
      for (const auto& e : part.excluded) excluded->push_back({name, e.level, e.count, e.reason});
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace detail

/// Bootstrap audit of one score column.
///
/// Replicate b draws |pool| records with replacement from a stream keyed on
/// (seed, b), fixes the decision threshold on the pooled replicate, and
/// records every level's diff from the attribute average. Each
/// (attribute, level, metric) cell is then summarized over the replicates
/// where its diff is defined and tested against zero with a one-sample
/// t-test. Output is independent of the worker count.
inline BootstrapAuditOutput bootstrap_audit(const Cohort& cohort, std::string_view model, const AuditConfig& config,
                                            AuditTrace* trace = nullptr) {
  config.validate();
  const auto view = detail::score_view(cohort, model);
  BootstrapAuditOutput out;
  const auto groups = detail::attribute_groups(cohort, config, &out.excluded);
  if (view.pool.size() < cohort.size()) {
    out.notes.push_back(std::to_string(cohort.size() - view.pool.size()) + " record(s) without a '" +
                        std::string(model) + "' score left out");
  }

  const std::size_t B = config.n_bootstrap;
  const std::size_t n_metrics = config.metrics.size();
  const bool need_threshold = config.any_threshold_metric();
  // replicate_values[b][attribute][metric][level]
  using Grid = std::vector<std::vector<std::vector<std::optional<double>>>>;
  std::vector<Grid> replicate_values(B);

  parallel_for(B, config.workers, [&](std::size_t b) {
    Rng rng = Rng::stream(config.seed, {detail::kBootstrapStream, b});
    std::vector<std::size_t> sample(view.pool.size());
    for (auto& s : sample) s = view.pool[rng.uniform_index(view.pool.size())];
    std::optional<double> threshold;
    if (need_threshold) threshold = detail::sample_threshold(sample, view, config.threshold);
    Grid grid;
    grid.reserve(groups.size());
    for (const auto& g : groups)
      grid.push_back(detail::level_metrics(sample, g.membership, g.levels.size(), view, config.metrics, threshold));
    replicate_values[b] = std::move(grid);
  });

  if (trace) {
    trace->attributes.clear();
    trace->levels.clear();
    trace->diffs.assign(groups.size(), {});
  }
  std::size_t undefined = 0;
  for (std::size_t a = 0; a < groups.size(); ++a) {
    const auto& g = groups[a];
    if (trace) {
      trace->attributes.push_back(g.name);
      trace->levels.push_back(g.levels);
      trace->diffs[a].assign(n_metrics, {});
    }
    for (std::size_t m = 0; m < n_metrics; ++m) {
      std::vector<std::vector<double>> diffs(g.levels.size()), values(g.levels.size());
      for (std::size_t b = 0; b < B; ++b) {
        const auto& v = replicate_values[b][a][m];
        const auto d = diffs_from_average(v);
        if (trace) trace->diffs[a][m].push_back(d.empty() ? std::vector<std::optional<double>>(v.size()) : d);
        for (std::size_t l = 0; l < g.levels.size(); ++l) {
          if (!d.empty() && d[l]) {
            diffs[l].push_back(*d[l]);
            values[l].push_back(*v[l]);
          } else {
            ++undefined;
          }
        }
      }
      for (std::size_t l = 0; l < g.levels.size(); ++l) {
        SubgroupAuditResult cell;
        cell.attribute = g.name;
        cell.level = g.levels[l];
        cell.metric = config.metrics[m];
        detail::reduce_cell(cell, diffs[l], values[l], config.alpha);
        out.results.push_back(std::move(cell));
      }
    }
  }
  if (undefined > 0)
    out.notes.push_back(std::to_string(undefined) + " replicate cell(s) with an undefined metric were skipped");
  return out;
}

// --- matched audit ---------------------------------------------------------

struct ContrastPlan {
  std::string attribute;
  std::string level_a;  // table order: level_a precedes level_b
  std::string level_b;
  CellStatus status = CellStatus::kOk;
  std::string message;
  std::optional<ContrastMatch> match;
};

/// Builds one propensity-matched sample per unordered pair of included
/// levels. Failed fits become FAILED plans and samples below
/// min_matched_n become SKIPPED plans; neither aborts the audit.
inline std::vector<ContrastPlan> plan_contrasts(const Cohort& cohort, const AuditConfig& config) {
  config.validate();
  MatchOptions options;
  options.caliper_multiplier = config.caliper_multiplier;
  options.fit = config.fit;
  options.min_matched_n = config.min_matched_n;
  std::vector<ContrastPlan> plans;
  for (const auto& g : detail::attribute_groups(cohort, config, nullptr)) {
    for (std::size_t i = 0; i < g.levels.size(); ++i) {
      for (std::size_t j = i + 1; j < g.levels.size(); ++j) {
        ContrastPlan plan{g.name, g.levels[i], g.levels[j], CellStatus::kOk, "", std::nullopt};
        try {
          plan.match = match_contrast(cohort, g.name, g.levels[i], g.levels[j], config.propensity_covariates, options);
          const auto& bal = plan.match->balance;
          if (!bal.passes_min_n) {
            plan.status = CellStatus::kSkipped;
            plan.message = std::to_string(bal.matched_n) + " matched pairs (" + std::to_string(bal.matched_n * 2) +
                           " records) < min_matched_n " + std::to_string(config.min_matched_n) + "; " +
                           std::to_string(plan.match->sample.unmatched_treated) + " treated unmatched";
          }
        } catch (const StatisticalError& e) {
          plan.status = CellStatus::kFailed;
          plan.message = e.what();
        }
        plans.push_back(std::move(plan));
      }
    }
  }
  return plans;
}

/// Bootstrap audit on propensity-matched samples. For every contrast the
/// matched pairs are resampled with replacement (keeping pairs intact) and
/// the two arms' diffs from their average are summarized exactly as in
/// bootstrap_audit. Results list, per level, one cell per other level.
inline std::vector<MatchedAuditResult> matched_audit(const Cohort& cohort, std::string_view model,
                                                     const AuditConfig& config,
                                                     const std::vector<ContrastPlan>& plans) {
  config.validate();
  const auto view = detail::score_view(cohort, model);
  const auto groups = detail::attribute_groups(cohort, config, nullptr);
  const std::size_t B = config.n_bootstrap;
  const std::size_t n_metrics = config.metrics.size();
  const bool need_threshold = config.any_threshold_metric();

  // cells[plan][metric] = {result for level_a, result for level_b}
  std::vector<std::vector<std::pair<SubgroupAuditResult, SubgroupAuditResult>>> cells(plans.size());
  for (std::size_t p = 0; p < plans.size(); ++p) {
    const auto& plan = plans[p];
    auto blank = [&](const std::string& level, std::size_t m) {
      SubgroupAuditResult r;
      r.attribute = plan.attribute;
      r.level = level;
      r.metric = config.metrics[m];
      r.status = plan.status;
      r.note = plan.message;
      return r;
    };
    for (std::size_t m = 0; m < n_metrics; ++m) cells[p].emplace_back(blank(plan.level_a, m), blank(plan.level_b, m));
    if (plan.status != CellStatus::kOk || !plan.match) continue;

    // Pairs where either member lacks this model's score are dropped.
    const auto& sample = plan.match->sample;
    std::vector<MatchedPair> pairs;
    for (const auto& pr : sample.pairs)
      if (!std::isnan(view.scores[pr.treated]) && !std::isnan(view.scores[pr.control])) pairs.push_back(pr);
    if (pairs.size() * 2 < config.min_matched_n || pairs.empty()) {
      for (auto& [ra, rb] : cells[p]) {
        ra.status = rb.status = CellStatus::kSkipped;
        ra.note = rb.note = "too few scored matched pairs";
      }
      continue;
    }
    // Slot 0 holds level_a, slot 1 level_b.
    std::vector<int> membership(cohort.size(), -1);
    const bool a_is_treated = sample.treated_level == plan.level_a;
    for (const auto& pr : pairs) {
      membership[pr.treated] = a_is_treated ? 0 : 1;
      membership[pr.control] = a_is_treated ? 1 : 0;
    }
    const auto attr_pos = static_cast<std::uint64_t>(
        std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.name == plan.attribute; }) -
        groups.begin());
    const auto& levels = groups[attr_pos].levels;
    const auto ia = static_cast<std::uint64_t>(std::find(levels.begin(), levels.end(), plan.level_a) - levels.begin());
    const auto ib = static_cast<std::uint64_t>(std::find(levels.begin(), levels.end(), plan.level_b) - levels.begin());

    std::vector<std::vector<std::vector<std::optional<double>>>> replicate_values(B);
    parallel_for(B, config.workers, [&](std::size_t b) {
      Rng rng = Rng::stream(config.seed, {detail::kMatchedStream, attr_pos, ia, ib, b});
      std::vector<std::size_t> draw;
      draw.reserve(pairs.size() * 2);
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto& pr = pairs[rng.uniform_index(pairs.size())];
        draw.push_back(pr.treated);
        draw.push_back(pr.control);
      }
      std::optional<double> threshold;
      if (need_threshold) threshold = detail::sample_threshold(draw, view, config.threshold);
      replicate_values[b] = detail::level_metrics(draw, membership, 2, view, config.metrics, threshold);
    });

    for (std::size_t m = 0; m < n_metrics; ++m) {
      std::vector<double> da, db, va, vb;
      for (std::size_t b = 0; b < B; ++b) {
        const auto& v = replicate_values[b][m];
        const auto d = diffs_from_average(v);
        if (d.empty()) continue;
        da.push_back(*d[0]);
        db.push_back(*d[1]);
        va.push_back(*v[0]);
        vb.push_back(*v[1]);
      }
      auto& [ra, rb] = cells[p][m];
      ra.note = rb.note = std::to_string(pairs.size()) + " matched pairs";
      detail::reduce_cell(ra, da, va, config.alpha);
      detail::reduce_cell(rb, db, vb, config.alpha);
    }
  }

  std::vector<MatchedAuditResult> out;
  for (const auto& g : groups) {
    for (std::size_t m = 0; m < n_metrics; ++m) {
      for (const auto& level : g.levels) {
        MatchedAuditResult r;
        r.attribute = g.name;
        r.level = level;
        r.metric = config.metrics[m];
        for (const auto& opponent : g.levels) {
          if (opponent == level) continue;
          for (std::size_t p = 0; p < plans.size(); ++p) {
            const auto& plan = plans[p];
            if (plan.attribute != g.name) continue;
            if (plan.level_a == level && plan.level_b == opponent) {
              r.opponents.push_back(opponent);
              r.cells.push_back(cells[p][m].first);
            } else if (plan.level_b == level && plan.level_a == opponent) {
              r.opponents.push_back(opponent);
              r.cells.push_back(cells[p][m].second);
            }
          }
        }
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

inline std::vector<MatchedAuditResult> matched_audit(const Cohort& cohort, std::string_view model,
                                                     const AuditConfig& config) {
  return matched_audit(cohort, model, config, plan_contrasts(cohort, config));
}

// --- discrepancy summary ---------------------------------------------------

enum class MatchingCondition { kBeforeMatching, kAfterMatching };
enum class ModelRole { kWithProtected, kWithoutProtected };

inline std::string_view condition_name(MatchingCondition c) {
  return c == MatchingCondition::kBeforeMatching ? "before_matching" : "after_matching";
}
inline std::string_view role_name(ModelRole r) {
  return r == ModelRole::kWithProtected ? "with_protected_model" : "without_protected_model";
}

struct DiscrepancySummary {
  std::string attribute;
  Metric metric = Metric::kAuroc;
  MatchingCondition matching = MatchingCondition::kBeforeMatching;
  ModelRole role = ModelRole::kWithoutProtected;
  double gap = 0.0;
  std::size_t n_levels = 0;

  bool operator==(const DiscrepancySummary&) const = default;
};

/// Max-minus-min of the per-level bootstrap-averaged diffs, per attribute,
/// before and after matching. Multi-contrast matched values of a level are
/// collapsed by their unweighted mean first. Only OK cells count; an
/// attribute/condition with fewer than two usable levels is omitted.
inline std::vector<DiscrepancySummary> summarize_discrepancy(const std::vector<SubgroupAuditResult>& before,
                                                             const std::vector<MatchedAuditResult>& after,
                                                             Metric metric, ModelRole role) {
  std::vector<std::string> attributes;
  auto note_attribute = [&](const std::string& a) {
    if (std::find(attributes.begin(), attributes.end(), a) == attributes.end()) attributes.push_back(a);
  };
  for (const auto& r : before)
    if (r.metric == metric) note_attribute(r.attribute);
  for (const auto& r : after)
    if (r.metric == metric) note_attribute(r.attribute);

  std::vector<DiscrepancySummary> out;
  auto emit = [&](const std::string& attribute, MatchingCondition cond, const std::vector<double>& collapsed) {
    if (collapsed.size() < 2) return;
    const auto [lo, hi] = std::minmax_element(collapsed.begin(), collapsed.end());
    out.push_back({attribute, metric, cond, role, *hi - *lo, collapsed.size()});
  };
  for (const auto& attribute : attributes) {
    std::vector<double> pre;
    for (const auto& r : before)
      if (r.metric == metric && r.attribute == attribute && r.status == CellStatus::kOk) pre.push_back(r.mean_diff);
    emit(attribute, MatchingCondition::kBeforeMatching, pre);

    std::vector<double> post;
    for (const auto& r : after) {
      if (r.metric != metric || r.attribute != attribute) continue;
      double sum = 0.0;
      std::size_t k = 0;
      for (const auto& c : r.cells) {
        if (c.status != CellStatus::kOk) continue;
        sum += c.mean_diff;
        ++k;
      }
      if (k > 0) post.push_back(sum / static_cast<double>(k));
    }
    emit(attribute, MatchingCondition::kAfterMatching, post);
  }
  return out;
}

// --- full runs and model comparison ----------------------------------------

struct PooledMetric {
  Metric metric = Metric::kAuroc;
  std::optional<double> value;
  bool operator==(const PooledMetric&) const = default;
};

struct AuditRun {
  std::string model;
  std::optional<double> pooled_threshold;
  std::vector<PooledMetric> pooled;
  std::vector<SubgroupAuditResult> subgroups;
  std::vector<MatchedAuditResult> matched;
  std::vector<ExcludedLevel> excluded;
  std::vector<std::string> notes;
  bool operator==(const AuditRun&) const = default;
};

/// Whole-cohort metric values for one score column (the "Overall" row).
inline std::vector<PooledMetric> pooled_metrics(const Cohort& cohort, std::string_view model, const AuditConfig& config,
                                                std::optional<double>* threshold_out = nullptr) {
  const auto view = detail::score_view(cohort, model);
  const auto threshold = detail::sample_threshold(view.pool, view, config.threshold);
  if (threshold_out) *threshold_out = threshold;
  std::vector<int> all(cohort.size(), 0);
  const auto values = detail::level_metrics(view.pool, all, 1, view, config.metrics, threshold);
  std::vector<PooledMetric> out;
  for (std::size_t m = 0; m < config.metrics.size(); ++m) out.push_back({config.metrics[m], values[m][0]});
  return out;
}

inline AuditRun run_audit(const Cohort& cohort, std::string_view model, const AuditConfig& config,
                          const std::vector<ContrastPlan>& plans, AuditTrace* trace = nullptr) {
  AuditRun run;
  run.model = std::string(model);
  run.pooled = pooled_metrics(cohort, model, config, &run.pooled_threshold);
  auto boot = bootstrap_audit(cohort, model, config, trace);
  run.subgroups = std::move(boot.results);
  run.excluded = std::move(boot.excluded);
  run.notes = std::move(boot.notes);
  if (!config.propensity_covariates.empty()) {
    run.matched = matched_audit(cohort, model, config, plans);
  } else {
    run.notes.push_back("no propensity covariates configured; matched audit skipped");
  }
  return run;
}

struct ComparisonDelta {
  std::string attribute;
  std::string level;
  Metric metric = Metric::kAuroc;
  std::string opponent;  // empty for unmatched cells
  double mean_diff_a = 0.0;
  double mean_diff_b = 0.0;
  double delta = 0.0;  // b - a
  bool significant_a = false;
  bool significant_b = false;

  bool operator==(const ComparisonDelta&) const = default;
};

struct ComparisonReport {
  AuditRun a;
  AuditRun b;
  std::vector<ComparisonDelta> deltas;
};

/// Side-by-side cells of two runs over the same cohort and config; only
/// cells that are OK in both runs are listed.
inline std::vector<ComparisonDelta> comparison_deltas(const AuditRun& a, const AuditRun& b) {
  std::vector<ComparisonDelta> deltas;
  auto add = [&](const SubgroupAuditResult& x, const SubgroupAuditResult& y, const std::string& opponent) {
    if (x.status != CellStatus::kOk || y.status != CellStatus::kOk) return;
    deltas.push_back({x.attribute, x.level, x.metric, opponent, x.mean_diff, y.mean_diff, y.mean_diff - x.mean_diff,
                      x.significant, y.significant});
  };
  for (std::size_t i = 0; i < a.subgroups.size() && i < b.subgroups.size(); ++i) add(a.subgroups[i], b.subgroups[i], "");
  for (std::size_t i = 0; i < a.matched.size() && i < b.matched.size(); ++i)
    for (std::size_t k = 0; k < a.matched[i].cells.size() && k < b.matched[i].cells.size(); ++k)
      add(a.matched[i].cells[k], b.matched[i].cells[k], a.matched[i].opponents[k]);
  return deltas;
}

/// Audits two score columns with the same seed, so replicate b resamples
/// the same records for both, and lines their cells up side by side.
inline ComparisonReport compare_models(const Cohort& cohort, std::string_view model_a, std::string_view model_b,
                                       const AuditConfig& config) {
  for (auto m : {model_a, model_b})
    if (!cohort.schema.score_index(m)) throw ValidationError("unknown model / score column '" + std::string(m) + "'");
  const auto plans = config.propensity_covariates.empty() ? std::vector<ContrastPlan>{} : plan_contrasts(cohort, config);
  ComparisonReport rep;
  rep.a = run_audit(cohort, model_a, config, plans);
  rep.b = run_audit(cohort, model_b, config, plans);
  rep.deltas = comparison_deltas(rep.a, rep.b);
  return rep;
}

}  // namespace fairaudit
