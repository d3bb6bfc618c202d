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
#include <iterator>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fairaudit/cohort.hpp"
#include "fairaudit/error.hpp"
#include "fairaudit/glm.hpp"

namespace fairaudit {

inline constexpr double kDefaultCaliperMultiplier = 0.2;
inline constexpr std::size_t kDefaultMinMatchedN = 100;

struct MatchedPair {
  std::size_t treated = 0;
  std::size_t control = 0;
  double distance = 0.0;  // |logit(e_t) - logit(e_c)|
  bool operator==(const MatchedPair&) const = default;
};

// 1:1 matching without replacement. Indices refer to whatever index space
// the sample was built in: positions of the propensity vector from
// greedy_match, cohort record positions after remap().
struct MatchedSample {
  std::string attribute;
  std::string treated_level;
  std::string control_level;
  std::vector<MatchedPair> pairs;
  std::size_t unmatched_treated = 0;
  std::optional<double> caliper;
  std::vector<std::string> warnings;
};

inline MatchedSample remap(MatchedSample sample, std::span<const std::size_t> index_map) {
  for (auto& p : sample.pairs) {
    p.treated = index_map[p.treated];
    p.control = index_map[p.control];
  }
  return sample;
}

/// Greedy nearest-neighbour matching on precomputed logit propensities.
///
/// Treated units are visited in descending logit order (lower position
/// first on ties) and each takes the closest still-unmatched control;
/// equal distances go to the control with the lower position. With a
/// caliper multiplier set, matches farther than multiplier * SD(pooled
/// logits) are refused and the treated unit stays unmatched.
inline MatchedSample greedy_match_logits(std::span<const double> logits, std::span<const int> treated,
                                         std::optional<double> caliper_multiplier) {
  if (logits.size() != treated.size()) throw ValidationError("propensities and treatment flags differ in length");
  std::vector<std::size_t> treated_idx;
  std::set<std::pair<double, std::size_t>> controls;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (treated[i] == 1) {
      treated_idx.push_back(i);
    } else {
      controls.emplace(logits[i], i);
    }
  }
  if (treated_idx.empty() || controls.empty()) throw ValidationError("matching needs at least one treated and one control unit");

  MatchedSample out;
  if (caliper_multiplier) {
    double mean = 0.0;
    for (double l : logits) mean += l;
    mean /= static_cast<double>(logits.size());
    double ss = 0.0;
    for (double l : logits) ss += (l - mean) * (l - mean);
    const double sd = logits.size() > 1 ? std::sqrt(ss / static_cast<double>(logits.size() - 1)) : 0.0;
    if (sd > 0.0) {
      out.caliper = *caliper_multiplier * sd;
    } else {
      out.warnings.push_back("logit propensities have zero spread; caliper disabled");
    }
  }

  std::stable_sort(treated_idx.begin(), treated_idx.end(),
                   [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });

  for (std::size_t t : treated_idx) {
    if (controls.empty()) {
      ++out.unmatched_treated;
      continue;
    }
    const double lt = logits[t];
    std::optional<std::pair<double, std::size_t>> best;
    double best_d = 0.0;
    auto consider = [&](const std::pair<double, std::size_t>& c) {
      const double d = std::fabs(lt - c.first);
      if (!best || d < best_d || (d == best_d && c.second < best->second)) {
        best = c;
        best_d = d;
      }
    };
    auto above = controls.lower_bound({lt, 0});
    if (above != controls.end()) consider(*above);  // lowest position at that logit
    if (above != controls.begin()) {
      const double below_logit = std::prev(above)->first;
      consider(*controls.lower_bound({below_logit, 0}));
    }
    if (out.caliper && best_d > *out.caliper) {
      ++out.unmatched_treated;
      continue;
    }
    out.pairs.push_back({t, best->second, best_d});
    controls.erase(*best);
  }
  return out;
}

/// Greedy matching on propensity scores; distances are taken on the logit
/// scale (propensities are clamped to [1e-15, 1 - 1e-15] first).
inline MatchedSample greedy_match(std::span<const double> propensities, std::span<const int> treated,
                                  std::optional<double> caliper_multiplier = kDefaultCaliperMultiplier) {
  std::vector<double> logits(propensities.size());
  for (std::size_t i = 0; i < propensities.size(); ++i)
    logits[i] = logit(std::clamp(propensities[i], 1e-15, 1.0 - 1e-15));
  return greedy_match_logits(logits, treated, caliper_multiplier);
}

/// Standardized mean difference |mean_a - mean_b| / sqrt((var_a + var_b) / 2)
/// with sample variances; nullopt when the pooled variance is zero.
inline std::optional<double> smd(std::span<const double> values, std::span<const std::size_t> group_a,
                                 std::span<const std::size_t> group_b) {
  if (group_a.empty() || group_b.empty()) throw ValidationError("smd needs two non-empty groups");
  auto moments = [&](std::span<const std::size_t> g) {
    double mean = 0.0;
    for (auto i : g) mean += values[i];
    mean /= static_cast<double>(g.size());
    double ss = 0.0;
    for (auto i : g) ss += (values[i] - mean) * (values[i] - mean);
    const double var = g.size() > 1 ? ss / static_cast<double>(g.size() - 1) : 0.0;
    return std::pair{mean, var};
  };
  const auto [ma, va] = moments(group_a);
  const auto [mb, vb] = moments(group_b);
  const double pooled = (va + vb) / 2.0;
  if (!(pooled > 0.0)) return std::nullopt;
  return std::fabs(ma - mb) / std::sqrt(pooled);
}

// Level of record `row` for a protected attribute; MISSING reads as "NA".
inline std::string level_of(const Cohort& cohort, std::size_t attribute_index, std::size_t row) {
  const auto& lvl = cohort.records[row].protected_levels[attribute_index];
  return lvl ? *lvl : std::string(kMissingLevel);
}

struct PropensityResult {
  std::vector<std::size_t> indices;  // cohort records at the two levels, in record order
  std::vector<int> treated;          // 1 for treated_level
  std::vector<double> propensity;
  LogisticModel model;
  std::vector<std::string> notes;
};

namespace detail {

inline void reject_protected(const Cohort& cohort, const std::vector<std::string>& covariates) {
  for (const auto& c : covariates)
    if (cohort.schema.protected_index(c))
      throw ValidationError("propensity covariates must exclude protected attributes (got '" + c + "')");
}

}  // namespace detail

/// Fits P(level = treated_level | covariates) on the records at either level.
inline PropensityResult estimate_propensity(const Cohort& cohort, std::string_view attribute,
                                            const std::string& treated_level, const std::string& control_level,
                                            const std::vector<std::string>& covariates, const FitOptions& fit = {}) {
  auto attr = cohort.schema.protected_index(attribute);
  if (!attr) throw ValidationError("unknown protected attribute '" + std::string(attribute) + "'");
  detail::reject_protected(cohort, covariates);
  if (treated_level == control_level) throw ValidationError("treated and control levels must differ");

  PropensityResult r;
  std::size_t n_treated = 0, n_control = 0;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto lvl = level_of(cohort, *attr, i);
    if (lvl == treated_level) {
      r.indices.push_back(i);
      r.treated.push_back(1);
      ++n_treated;
    } else if (lvl == control_level) {
      r.indices.push_back(i);
      r.treated.push_back(0);
      ++n_control;
    }
  }
  if (n_treated < 2 || n_control < 2) {
    throw ValidationError("attribute '" + std::string(attribute) + "': levels '" + treated_level + "' (" +
                          std::to_string(n_treated) + ") and '" + control_level + "' (" + std::to_string(n_control) +
                          ") need at least 2 records each");
  }
  const auto design = encode_design(cohort, r.indices, covariates);
  r.notes = design.notes;
  r.model = fit_logistic(design, r.treated, fit);
  if (!r.model.converged) r.notes.push_back("propensity model did not converge");
  r.propensity = predict_proba(r.model, design);
  return r;
}

struct BalanceEntry {
  std::string covariate;
  std::optional<double> smd_before;
  std::optional<double> smd_after;
  bool operator==(const BalanceEntry&) const = default;
};

struct BalanceReport {
  std::string attribute;
  std::string treated_level;
  std::string control_level;
  std::vector<BalanceEntry> entries;
  std::size_t matched_n = 0;  // number of pairs
  bool passes_min_n = false;
  bool operator==(const BalanceReport&) const = default;
};

/// Covariate balance before matching (all records at the two levels) and
/// after matching (matched pairs only). `matched` must use cohort record
/// indices. Numeric covariates use observed values; categorical ones are
/// checked per level indicator.
inline BalanceReport balance_report(const Cohort& cohort, const MatchedSample& matched,
                                    const std::vector<std::string>& covariates,
                                    std::size_t min_matched_n = kDefaultMinMatchedN) {
  auto attr = cohort.schema.protected_index(matched.attribute);
  if (!attr) throw ValidationError("unknown protected attribute '" + matched.attribute + "'");
  std::vector<std::size_t> before_t, before_c, after_t, after_c;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto lvl = level_of(cohort, *attr, i);
    if (lvl == matched.treated_level) before_t.push_back(i);
    if (lvl == matched.control_level) before_c.push_back(i);
  }
  for (const auto& p : matched.pairs) {
    after_t.push_back(p.treated);
    after_c.push_back(p.control);
  }

  BalanceReport report;
  report.attribute = matched.attribute;
  report.treated_level = matched.treated_level;
  report.control_level = matched.control_level;
  report.matched_n = matched.pairs.size();
  report.passes_min_n = matched.pairs.size() * 2 >= min_matched_n;

  std::vector<double> values(cohort.size(), 0.0);
  auto evaluate = [&](const std::string& name, auto&& value_at) {
    std::vector<std::size_t> bt, bc, at, ac;
    auto keep = [&](const std::vector<std::size_t>& src, std::vector<std::size_t>& dst) {
      for (auto i : src) {
        if (auto v = value_at(i)) {
          values[i] = *v;
          dst.push_back(i);
        }
      }
    };
    keep(before_t, bt);
    keep(before_c, bc);
    keep(after_t, at);
    keep(after_c, ac);
    BalanceEntry e{name, std::nullopt, std::nullopt};
    if (!bt.empty() && !bc.empty()) e.smd_before = smd(values, bt, bc);
    if (!at.empty() && !ac.empty()) e.smd_after = smd(values, at, ac);
    report.entries.push_back(std::move(e));
  };

  for (const auto& name : covariates) {
    const auto src = detail::resolve_source(cohort, name);
    if (!src.categorical) {
      evaluate(name, [&](std::size_t i) { return detail::numeric_at(cohort, src, i); });
      continue;
    }
    std::vector<std::string> levels;
    std::set<std::string> seen;
    for (auto i : before_t)
      if (seen.insert(detail::level_at(cohort, src, i)).second) levels.push_back(detail::level_at(cohort, src, i));
    for (auto i : before_c)
      if (seen.insert(detail::level_at(cohort, src, i)).second) levels.push_back(detail::level_at(cohort, src, i));
    for (const auto& level : levels) {
      evaluate(name + "=" + level, [&](std::size_t i) -> std::optional<double> {
        return detail::level_at(cohort, src, i) == level ? 1.0 : 0.0;
      });
    }
  }
  return report;
}

struct MatchOptions {
  std::optional<double> caliper_multiplier = kDefaultCaliperMultiplier;
  FitOptions fit;
  std::size_t min_matched_n = kDefaultMinMatchedN;
  // Treat the smaller of the two levels as "treated" (ties: first level).
  bool smaller_level_treated = true;
};

struct ContrastMatch {
  PropensityResult propensity;
  MatchedSample sample;  // cohort record indices
  BalanceReport balance;
};

/// Propensity estimation, greedy matching and balance diagnostics for one
/// contrast of two attribute levels.
inline ContrastMatch match_contrast(const Cohort& cohort, std::string_view attribute, const std::string& level_a,
                                    const std::string& level_b, const std::vector<std::string>& covariates,
                                    const MatchOptions& options = {}) {
  auto attr = cohort.schema.protected_index(attribute);
  if (!attr) throw ValidationError("unknown protected attribute '" + std::string(attribute) + "'");
  std::string treated = level_a, control = level_b;
  if (options.smaller_level_treated) {
    std::size_t na = 0, nb = 0;
    for (std::size_t i = 0; i < cohort.size(); ++i) {
      const auto lvl = level_of(cohort, *attr, i);
      na += lvl == level_a;
      nb += lvl == level_b;
    }
    if (nb < na) std::swap(treated, control);
  }
  ContrastMatch out;
  out.propensity = estimate_propensity(cohort, attribute, treated, control, covariates, options.fit);
  auto sample = greedy_match(out.propensity.propensity, out.propensity.treated, options.caliper_multiplier);
  sample.attribute = std::string(attribute);
  sample.treated_level = treated;
  sample.control_level = control;
  out.sample = remap(std::move(sample), out.propensity.indices);
  out.balance = balance_report(cohort, out.sample, covariates, options.min_matched_n);
  return out;
}

// Delimited export of matched pairs: treated_id, control_id, distance.
inline void write_pairs(std::ostream& out, const Cohort& cohort, const MatchedSample& sample) {
  out << "# fairaudit-pairs schema_version=1 attribute=" << sample.attribute << " treated=" << sample.treated_level
      << " control=" << sample.control_level << '\n';
  out << "treated_id,control_id,distance\n";
  for (const auto& p : sample.pairs) {
    out << detail::quote_field(cohort.records[p.treated].id, ',') << ','
        << detail::quote_field(cohort.records[p.control].id, ',') << ',' << detail::format_shortest(p.distance) << '\n';
  }
}

}  // namespace fairaudit
