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
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fairaudit/audit.hpp"
#include "fairaudit/cohort.hpp"
#include "fairaudit/error.hpp"
#include "fairaudit/metrics.hpp"

namespace fairaudit {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr std::string_view kToolkitVersion = "0.1.0";

// --- number formatting -------------------------------------------------------

/// Rounds to `places` decimals (correctly rounded from the binary value) and
/// prints the shortest text for the rounded value, always with a decimal
/// point: 0.8 -> "0.8", 1 -> "1.0". Negative zero prints as "0.0".
inline std::string format_rounded(double x, int places) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[512];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::fixed, places);
  if (ec != std::errc()) throw Error("number formatting failed");
  double rounded = 0.0;
  std::from_chars(buf, end, rounded);
  if (rounded == 0.0) rounded = 0.0;
  std::string s = detail::format_shortest(rounded);
  if (s.find_first_of(".eni") == std::string::npos) s += ".0";
  return s;
}

/// Fixed-point text with exactly `places` decimals.
inline std::string format_fixed(double x, int places = 2) {
  char buf[512];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::fixed, places);
  if (ec != std::errc()) throw Error("number formatting failed");
  return std::string(buf, end);
}

/// Stable 64-bit FNV-1a digest as 16 hex digits.
inline std::string fnv1a64_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
  return out;
}

// --- bundle ------------------------------------------------------------------

struct RunMetadata {
  int schema_version = kReportSchemaVersion;
  std::string toolkit_version{kToolkitVersion};
  std::uint64_t seed = 0;
  std::size_t n_bootstrap = 0;
  double alpha = 0.05;
  int rounding = 2;
  std::string config_hash;
  std::string cohort;
  std::size_t n_records = 0;
  std::vector<Metric> metrics;
  bool operator==(const RunMetadata&) const = default;
};

struct ModelReport {
  AuditRun run;
  std::optional<ModelRole> role;
  std::vector<DiscrepancySummary> discrepancy;
  CalibrationCurve calibration;
  bool operator==(const ModelReport&) const = default;
};

struct BalanceSection {
  std::string attribute;
  std::string level_a;
  std::string level_b;
  CellStatus status = CellStatus::kOk;
  std::string message;
  std::string treated_level;
  std::string control_level;
  std::size_t matched_pairs = 0;
  std::size_t unmatched_treated = 0;
  std::optional<double> caliper;
  std::vector<BalanceEntry> entries;
  bool operator==(const BalanceSection&) const = default;
};

struct ComparisonSection {
  std::string model_a;
  std::string model_b;
  std::vector<ComparisonDelta> deltas;
  bool operator==(const ComparisonSection&) const = default;
};

struct ReportBundle {
  RunMetadata metadata;
  std::vector<ModelReport> models;
  std::vector<BalanceSection> balance;
  std::optional<ComparisonSection> comparison;
  bool operator==(const ReportBundle&) const = default;
};

struct ModelSpec {
  std::string model;
  std::optional<ModelRole> role;
};

inline BalanceSection balance_section(const ContrastPlan& plan) {
  BalanceSection s;
  s.attribute = plan.attribute;
  s.level_a = plan.level_a;
  s.level_b = plan.level_b;
  s.status = plan.status;
  s.message = plan.message;
  if (plan.match) {
    s.treated_level = plan.match->sample.treated_level;
    s.control_level = plan.match->sample.control_level;
    s.matched_pairs = plan.match->sample.pairs.size();
    s.unmatched_treated = plan.match->sample.unmatched_treated;
    s.caliper = plan.match->sample.caliper;
    s.entries = plan.match->balance.entries;
  }
  return s;
}

/// Runs the full audit for each model and assembles the report. With two
/// models the second is compared against the first.
inline ReportBundle build_report(const Cohort& cohort, const AuditConfig& config, const std::vector<ModelSpec>& models,
                                 const std::string& cohort_label, const std::string& config_hash,
                                 std::vector<AuditTrace>* traces = nullptr) {
  if (models.empty()) throw ConfigError("no score column selected for the audit");
  config.validate();
  ReportBundle bundle;
  auto& meta = bundle.metadata;
  meta.seed = config.seed;
  meta.n_bootstrap = config.n_bootstrap;
  meta.alpha = config.alpha;
  meta.rounding = config.rounding;
  meta.config_hash = config_hash;
  meta.cohort = cohort_label;
  meta.n_records = cohort.size();
  meta.metrics = config.metrics;

  const auto plans = config.propensity_covariates.empty() ? std::vector<ContrastPlan>{} : plan_contrasts(cohort, config);
  for (const auto& plan : plans) bundle.balance.push_back(balance_section(plan));
  if (traces) traces->clear();
  for (const auto& spec : models) {
    ModelReport mr;
    AuditTrace trace;
    mr.run = run_audit(cohort, spec.model, config, plans, traces ? &trace : nullptr);
    if (traces) traces->push_back(std::move(trace));
    mr.role = spec.role;
    for (auto m : config.metrics) {
      auto d = summarize_discrepancy(mr.run.subgroups, mr.run.matched, m, spec.role.value_or(ModelRole::kWithoutProtected));
      mr.discrepancy.insert(mr.discrepancy.end(), d.begin(), d.end());
    }
    const auto view = detail::score_view(cohort, spec.model);
    std::vector<int> labels;
    std::vector<double> scores;
    for (auto i : view.pool) {
      labels.push_back(view.labels[i]);
      scores.push_back(view.scores[i]);
    }
    mr.calibration = calibration_curve(labels, scores);
    bundle.models.push_back(std::move(mr));
  }
  if (bundle.models.size() == 2) {
    bundle.comparison = ComparisonSection{bundle.models[0].run.model, bundle.models[1].run.model,
                                          comparison_deltas(bundle.models[0].run, bundle.models[1].run)};
  }
  return bundle;
}

/// True when every subgroup and matched cell of every model is INSUFFICIENT.
inline bool all_cells_insufficient(const ReportBundle& bundle) {
  std::size_t cells = 0;
  for (const auto& m : bundle.models) {
    for (const auto& c : m.run.subgroups) {
      if (c.status != CellStatus::kInsufficient) return false;
      ++cells;
    }
    for (const auto& r : m.run.matched) {
      for (const auto& c : r.cells) {
        if (c.status != CellStatus::kInsufficient) return false;
        ++cells;
      }
    }
  }
  return cells > 0;
}

// --- JSON --------------------------------------------------------------------

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson num_json(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

inline double num_from(const ojson& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw ValidationError("bad number '" + s + "'");
  }
  return j.get<double>();
}

inline ojson opt_json(const std::optional<double>& x) { return x ? num_json(*x) : ojson(nullptr); }
inline std::optional<double> opt_from(const ojson& j) {
  if (j.is_null()) return std::nullopt;
  return num_from(j);
}

inline Metric metric_from(const ojson& j) {
  auto m = parse_metric(j.get<std::string>());
  if (!m) throw ValidationError("unknown metric '" + j.get<std::string>() + "'");
  return *m;
}

inline CellStatus status_from(const ojson& j) {
  auto s = parse_cell_status(j.get<std::string>());
  if (!s) throw ValidationError("unknown cell status '" + j.get<std::string>() + "'");
  return *s;
}

inline ojson cell_json(const SubgroupAuditResult& c) {
  ojson j;
  j["attribute"] = c.attribute;
  j["level"] = c.level;
  j["metric"] = metric_name(c.metric);
  j["status"] = cell_status_name(c.status);
  j["mean_diff"] = num_json(c.mean_diff);
  j["sd"] = num_json(c.sd);
  j["mean_value"] = num_json(c.mean_value);
  j["t_stat"] = num_json(c.t_stat);
  j["p_value"] = num_json(c.p_value);
  j["significant"] = c.significant;
  j["degenerate"] = c.degenerate;
  j["n_effective"] = c.n_effective;
  j["note"] = c.note;
  return j;
}

inline SubgroupAuditResult cell_from(const ojson& j) {
  SubgroupAuditResult c;
  c.attribute = j.at("attribute").get<std::string>();
  c.level = j.at("level").get<std::string>();
  c.metric = metric_from(j.at("metric"));
  c.status = status_from(j.at("status"));
  c.mean_diff = num_from(j.at("mean_diff"));
  c.sd = num_from(j.at("sd"));
  c.mean_value = num_from(j.at("mean_value"));
  c.t_stat = num_from(j.at("t_stat"));
  c.p_value = num_from(j.at("p_value"));
  c.significant = j.at("significant").get<bool>();
  c.degenerate = j.at("degenerate").get<bool>();
  c.n_effective = j.at("n_effective").get<std::size_t>();
  c.note = j.at("note").get<std::string>();
  return c;
}

inline std::optional<ModelRole> role_from(const ojson& j) {
  if (j.is_null()) return std::nullopt;
  const auto s = j.get<std::string>();
  if (s == role_name(ModelRole::kWithProtected)) return ModelRole::kWithProtected;
  if (s == role_name(ModelRole::kWithoutProtected)) return ModelRole::kWithoutProtected;
  throw ValidationError("unknown model role '" + s + "'");
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const ReportBundle& b) {
  using detail::ojson;
  ojson j;
  j["schema_version"] = b.metadata.schema_version;
  j["kind"] = "fairaudit-report";
  auto& meta = j["metadata"];
  meta["toolkit_version"] = b.metadata.toolkit_version;
  meta["seed"] = b.metadata.seed;
  meta["n_bootstrap"] = b.metadata.n_bootstrap;
  meta["alpha"] = b.metadata.alpha;
  meta["rounding"] = b.metadata.rounding;
  meta["config_hash"] = b.metadata.config_hash;
  meta["cohort"] = b.metadata.cohort;
  meta["n_records"] = b.metadata.n_records;
  meta["metrics"] = ojson::array();
  for (auto m : b.metadata.metrics) meta["metrics"].push_back(metric_name(m));

  auto& models = j["models"] = ojson::array();
  for (const auto& mr : b.models) {
    ojson m;
    m["model"] = mr.run.model;
    m["role"] = mr.role ? ojson(role_name(*mr.role)) : ojson(nullptr);
    m["pooled_threshold"] = detail::opt_json(mr.run.pooled_threshold);
    auto& pooled = m["pooled"] = ojson::array();
    for (const auto& p : mr.run.pooled) pooled.push_back({{"metric", metric_name(p.metric)}, {"value", detail::opt_json(p.value)}});
    auto& sub = m["subgroups"] = ojson::array();
    for (const auto& c : mr.run.subgroups) sub.push_back(detail::cell_json(c));
    auto& matched = m["matched"] = ojson::array();
    for (const auto& r : mr.run.matched) {
      ojson mj;
      mj["attribute"] = r.attribute;
      mj["level"] = r.level;
      mj["metric"] = metric_name(r.metric);
      mj["opponents"] = r.opponents;
      mj["cells"] = ojson::array();
      for (const auto& c : r.cells) mj["cells"].push_back(detail::cell_json(c));
      matched.push_back(std::move(mj));
    }
    auto& excluded = m["excluded"] = ojson::array();
    for (const auto& e : mr.run.excluded)
      excluded.push_back({{"attribute", e.attribute}, {"level", e.level}, {"count", e.count}, {"reason", e.reason}});
    m["notes"] = mr.run.notes;
    auto& disc = m["discrepancy"] = ojson::array();
    for (const auto& d : mr.discrepancy) {
      disc.push_back({{"attribute", d.attribute},
                      {"metric", metric_name(d.metric)},
                      {"matching", condition_name(d.matching)},
                      {"role", role_name(d.role)},
                      {"gap", detail::num_json(d.gap)},
                      {"n_levels", d.n_levels}});
    }
    auto& cal = m["calibration"];
    cal["n_bins"] = mr.calibration.n_bins;
    cal["bins"] = ojson::array();
    for (const auto& bin : mr.calibration.bins) {
      cal["bins"].push_back({{"mean_score", detail::num_json(bin.mean_score)},
                             {"positive_fraction", detail::num_json(bin.positive_fraction)},
                             {"count", bin.count}});
    }
    models.push_back(std::move(m));
  }

  auto& balance = j["balance"] = ojson::array();
  for (const auto& s : b.balance) {
    ojson bj;
    bj["attribute"] = s.attribute;
    bj["level_a"] = s.level_a;
    bj["level_b"] = s.level_b;
    bj["status"] = cell_status_name(s.status);
    bj["message"] = s.message;
    bj["treated_level"] = s.treated_level;
    bj["control_level"] = s.control_level;
    bj["matched_pairs"] = s.matched_pairs;
    bj["unmatched_treated"] = s.unmatched_treated;
    bj["caliper"] = detail::opt_json(s.caliper);
    bj["entries"] = ojson::array();
    for (const auto& e : s.entries) {
      bj["entries"].push_back({{"covariate", e.covariate},
                               {"smd_before", detail::opt_json(e.smd_before)},
                               {"smd_after", detail::opt_json(e.smd_after)}});
    }
    balance.push_back(std::move(bj));
  }

  if (b.comparison) {
    auto& c = j["comparison"];
    c["model_a"] = b.comparison->model_a;
    c["model_b"] = b.comparison->model_b;
    c["deltas"] = ojson::array();
    for (const auto& d : b.comparison->deltas) {
      c["deltas"].push_back({{"attribute", d.attribute},
                             {"level", d.level},
                             {"metric", metric_name(d.metric)},
                             {"opponent", d.opponent},
                             {"mean_diff_a", detail::num_json(d.mean_diff_a)},
                             {"mean_diff_b", detail::num_json(d.mean_diff_b)},
                             {"delta", detail::num_json(d.delta)},
                             {"significant_a", d.significant_a},
                             {"significant_b", d.significant_b}});
    }
  } else {
    j["comparison"] = nullptr;
  }
  return j;
}

inline ReportBundle bundle_from_json(const nlohmann::ordered_json& j) {
  try {
    if (j.at("kind").get<std::string>() != "fairaudit-report") throw ValidationError("not a fairaudit report");
    ReportBundle b;
    b.metadata.schema_version = j.at("schema_version").get<int>();
    if (b.metadata.schema_version != kReportSchemaVersion)
      throw ValidationError("unsupported report schema_version " + std::to_string(b.metadata.schema_version));
    const auto& meta = j.at("metadata");
    b.metadata.toolkit_version = meta.at("toolkit_version").get<std::string>();
    b.metadata.seed = meta.at("seed").get<std::uint64_t>();
    b.metadata.n_bootstrap = meta.at("n_bootstrap").get<std::size_t>();
    b.metadata.alpha = meta.at("alpha").get<double>();
    b.metadata.rounding = meta.at("rounding").get<int>();
    b.metadata.config_hash = meta.at("config_hash").get<std::string>();
    b.metadata.cohort = meta.at("cohort").get<std::string>();
    b.metadata.n_records = meta.at("n_records").get<std::size_t>();
    for (const auto& m : meta.at("metrics")) b.metadata.metrics.push_back(detail::metric_from(m));

    for (const auto& m : j.at("models")) {
      ModelReport mr;
      mr.run.model = m.at("model").get<std::string>();
      mr.role = detail::role_from(m.at("role"));
      mr.run.pooled_threshold = detail::opt_from(m.at("pooled_threshold"));
      for (const auto& p : m.at("pooled")) mr.run.pooled.push_back({detail::metric_from(p.at("metric")), detail::opt_from(p.at("value"))});
      for (const auto& c : m.at("subgroups")) mr.run.subgroups.push_back(detail::cell_from(c));
      for (const auto& mj : m.at("matched")) {
        MatchedAuditResult r;
        r.attribute = mj.at("attribute").get<std::string>();
        r.level = mj.at("level").get<std::string>();
        r.metric = detail::metric_from(mj.at("metric"));
        r.opponents = mj.at("opponents").get<std::vector<std::string>>();
        for (const auto& c : mj.at("cells")) r.cells.push_back(detail::cell_from(c));
        mr.run.matched.push_back(std::move(r));
      }
      for (const auto& e : m.at("excluded")) {
        mr.run.excluded.push_back({e.at("attribute").get<std::string>(), e.at("level").get<std::string>(),
                                   e.at("count").get<std::size_t>(), e.at("reason").get<std::string>()});
      }
      mr.run.notes = m.at("notes").get<std::vector<std::string>>();
      for (const auto& d : m.at("discrepancy")) {
        DiscrepancySummary s;
        s.attribute = d.at("attribute").get<std::string>();
        s.metric = detail::metric_from(d.at("metric"));
        s.matching = d.at("matching").get<std::string>() == condition_name(MatchingCondition::kAfterMatching)
                         ? MatchingCondition::kAfterMatching
                         : MatchingCondition::kBeforeMatching;
        s.role = *detail::role_from(d.at("role"));
        s.gap = detail::num_from(d.at("gap"));
        s.n_levels = d.at("n_levels").get<std::size_t>();
        mr.discrepancy.push_back(std::move(s));
      }
      const auto& cal = m.at("calibration");
      mr.calibration.n_bins = cal.at("n_bins").get<std::size_t>();
      for (const auto& bin : cal.at("bins")) {
        mr.calibration.bins.push_back({detail::num_from(bin.at("mean_score")), detail::num_from(bin.at("positive_fraction")),
                                       bin.at("count").get<std::size_t>()});
      }
      b.models.push_back(std::move(mr));
    }

    for (const auto& bj : j.at("balance")) {
      BalanceSection s;
      s.attribute = bj.at("attribute").get<std::string>();
      s.level_a = bj.at("level_a").get<std::string>();
      s.level_b = bj.at("level_b").get<std::string>();
      s.status = detail::status_from(bj.at("status"));
      s.message = bj.at("message").get<std::string>();
      s.treated_level = bj.at("treated_level").get<std::string>();
      s.control_level = bj.at("control_level").get<std::string>();
      s.matched_pairs = bj.at("matched_pairs").get<std::size_t>();
      s.unmatched_treated = bj.at("unmatched_treated").get<std::size_t>();
      s.caliper = detail::opt_from(bj.at("caliper"));
      for (const auto& e : bj.at("entries")) {
        s.entries.push_back({e.at("covariate").get<std::string>(), detail::opt_from(e.at("smd_before")),
                             detail::opt_from(e.at("smd_after"))});
      }
      b.balance.push_back(std::move(s));
    }

    if (const auto& c = j.at("comparison"); !c.is_null()) {
      ComparisonSection cs;
      cs.model_a = c.at("model_a").get<std::string>();
      cs.model_b = c.at("model_b").get<std::string>();
      for (const auto& d : c.at("deltas")) {
        cs.deltas.push_back({d.at("attribute").get<std::string>(), d.at("level").get<std::string>(),
                             detail::metric_from(d.at("metric")), d.at("opponent").get<std::string>(),
                             detail::num_from(d.at("mean_diff_a")), detail::num_from(d.at("mean_diff_b")),
                             detail::num_from(d.at("delta")), d.at("significant_a").get<bool>(),
                             d.at("significant_b").get<bool>()});
      }
      b.comparison = std::move(cs);
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed report: ") + e.what());
  }
}

// --- text renderers ----------------------------------------------------------

enum class ReportFormat { kJson, kCsv, kMarkdown, kSvgCalibration };

inline std::string_view format_name(ReportFormat f) {
  switch (f) {
    case ReportFormat::kJson: return "json";
    case ReportFormat::kCsv: return "csv";
    case ReportFormat::kMarkdown: return "markdown";
    case ReportFormat::kSvgCalibration: return "svg-calibration";
  }
  return "?";
}

inline std::optional<ReportFormat> parse_format(std::string_view s) {
  for (auto f : {ReportFormat::kJson, ReportFormat::kCsv, ReportFormat::kMarkdown, ReportFormat::kSvgCalibration})
    if (format_name(f) == s) return f;
  return std::nullopt;
}

namespace detail {

// Table cell text for one audit cell: rounded mean diff with "*" when
// significant, or the status name.
inline std::string cell_text(const SubgroupAuditResult& c, int places) {
  if (c.status != CellStatus::kOk) return std::string(cell_status_name(c.status));
  return format_rounded(c.mean_diff, places) + (c.significant ? "*" : "");
}

// Matched cell for one level: a single opponent prints bare, several print
// as "[a, b]" in table order.
inline std::string matched_text(const MatchedAuditResult& r, int places) {
  if (r.cells.empty()) return "";
  if (r.cells.size() == 1) return cell_text(r.cells[0], places);
  std::string s = "[";
  for (std::size_t k = 0; k < r.cells.size(); ++k) {
    if (k) s += ", ";
    s += cell_text(r.cells[k], places);
  }
  return s + "]";
}

inline std::string opt_shortest(const std::optional<double>& v) { return v ? format_shortest(*v) : ""; }
inline std::string opt_rounded(const std::optional<double>& v, int places) { return v ? format_rounded(*v, places) : "NA"; }

inline std::string csv_row(std::initializer_list<std::string> fields) {
  std::string s;
  bool first = true;
  for (const auto& f : fields) {
    if (!first) s += ',';
    s += quote_field(f, ',');
    first = false;
  }
  return s + '\n';
}

inline const MatchedAuditResult* find_matched(const AuditRun& run, const std::string& attribute, const std::string& level,
                                              Metric metric) {
  for (const auto& r : run.matched)
    if (r.attribute == attribute && r.level == level && r.metric == metric) return &r;
  return nullptr;
}

inline const SubgroupAuditResult* find_cell(const AuditRun& run, const std::string& attribute, const std::string& level,
                                            Metric metric) {
  for (const auto& c : run.subgroups)
    if (c.attribute == attribute && c.level == level && c.metric == metric) return &c;
  return nullptr;
}

inline std::string model_header(const ModelReport& m) {
  if (!m.role) return m.run.model;
  return m.run.model + (*m.role == ModelRole::kWithProtected ? " (with protected attributes)" : " (without protected attributes)");
}

}  // namespace detail

/// A named text file produced by a renderer.
struct RenderedFile {
  std::string name;
  std::string content;
};

inline std::string render_json(const ReportBundle& b) { return to_json(b).dump(2) + "\n"; }

inline std::vector<RenderedFile> render_csv(const ReportBundle& b) {
  const int p = b.metadata.rounding;
  const std::string header = "# fairaudit-report schema_version=" + std::to_string(b.metadata.schema_version) +
                             " config_hash=" + b.metadata.config_hash + "\n";
  using detail::csv_row;
  std::vector<RenderedFile> files;

  std::string pooled = header + "model,metric,value,display,threshold\n";
  std::string sub = header +
                    "model,attribute,level,metric,status,mean_diff,display,significant,sd,mean_value,t_stat,p_value,"
                    "n_effective,degenerate,note\n";
  std::string matched = header +
                        "model,attribute,level,metric,opponent,status,mean_diff,display,significant,sd,mean_value,"
                        "t_stat,p_value,n_effective,degenerate,note\n";
  std::string disc = header + "model,role,attribute,metric,matching,gap,display,n_levels\n";
  std::string cal = header + "model,bin,mean_score,positive_fraction,count\n";
  std::string excl = header + "model,attribute,level,count,reason\n";
  auto cell_fields = [&](const SubgroupAuditResult& c) {
    return std::vector<std::string>{std::string(cell_status_name(c.status)),
                                    detail::format_shortest(c.mean_diff),
                                    detail::cell_text(c, p),
                                    c.significant ? "true" : "false",
                                    detail::format_shortest(c.sd),
                                    detail::format_shortest(c.mean_value),
                                    detail::format_shortest(c.t_stat),
                                    detail::format_shortest(c.p_value),
                                    std::to_string(c.n_effective),
                                    c.degenerate ? "true" : "false",
                                    c.note};
  };
  auto join = [](std::vector<std::string> head, const std::vector<std::string>& tail) {
    head.insert(head.end(), tail.begin(), tail.end());
    std::string s;
    for (std::size_t i = 0; i < head.size(); ++i) {
      if (i) s += ',';
      s += detail::quote_field(head[i], ',');
    }
    return s + '\n';
  };

  for (const auto& m : b.models) {
    const auto& model = m.run.model;
    for (const auto& pm : m.run.pooled)
      pooled += csv_row({model, std::string(metric_name(pm.metric)), detail::opt_shortest(pm.value),
                         detail::opt_rounded(pm.value, p), detail::opt_shortest(m.run.pooled_threshold)});
    for (const auto& c : m.run.subgroups)
      sub += join({model, c.attribute, c.level, std::string(metric_name(c.metric))}, cell_fields(c));
    for (const auto& r : m.run.matched)
      for (std::size_t k = 0; k < r.cells.size(); ++k)
        matched += join({model, r.attribute, r.level, std::string(metric_name(r.metric)), r.opponents[k]}, cell_fields(r.cells[k]));
    for (const auto& d : m.discrepancy)
      disc += csv_row({model, std::string(role_name(d.role)), d.attribute, std::string(metric_name(d.metric)),
                       std::string(condition_name(d.matching)), detail::format_shortest(d.gap), format_rounded(d.gap, p),
                       std::to_string(d.n_levels)});
    for (std::size_t k = 0; k < m.calibration.bins.size(); ++k) {
      const auto& bin = m.calibration.bins[k];
      cal += csv_row({model, std::to_string(k), detail::format_shortest(bin.mean_score),
                      detail::format_shortest(bin.positive_fraction), std::to_string(bin.count)});
    }
    for (const auto& e : m.run.excluded) excl += csv_row({model, e.attribute, e.level, std::to_string(e.count), e.reason});
  }
  files.push_back({"pooled.csv", pooled});
  files.push_back({"subgroups.csv", sub});
  files.push_back({"matched.csv", matched});
  files.push_back({"discrepancy.csv", disc});
  files.push_back({"calibration.csv", cal});
  files.push_back({"excluded.csv", excl});

  std::string bal = header +
                    "attribute,level_a,level_b,status,treated_level,control_level,matched_pairs,unmatched_treated,"
                    "caliper,covariate,smd_before,smd_after,message\n";
  for (const auto& s : b.balance) {
    auto row = [&](const std::string& cov, const std::optional<double>& before, const std::optional<double>& after) {
      bal += csv_row({s.attribute, s.level_a, s.level_b, std::string(cell_status_name(s.status)), s.treated_level,
                      s.control_level, std::to_string(s.matched_pairs), std::to_string(s.unmatched_treated),
                      detail::opt_shortest(s.caliper), cov, detail::opt_shortest(before), detail::opt_shortest(after),
                      s.message});
    };
    if (s.entries.empty()) row("", std::nullopt, std::nullopt);
    for (const auto& e : s.entries) row(e.covariate, e.smd_before, e.smd_after);
  }
  files.push_back({"balance.csv", bal});

  if (b.comparison) {
    std::string cmp = header +
                      "attribute,level,metric,opponent,model_a,model_b,mean_diff_a,mean_diff_b,delta,display_a,"
                      "display_b,display_delta,significant_a,significant_b\n";
    for (const auto& d : b.comparison->deltas) {
      cmp += csv_row({d.attribute, d.level, std::string(metric_name(d.metric)), d.opponent, b.comparison->model_a,
                      b.comparison->model_b, detail::format_shortest(d.mean_diff_a), detail::format_shortest(d.mean_diff_b),
                      detail::format_shortest(d.delta), format_rounded(d.mean_diff_a, p), format_rounded(d.mean_diff_b, p),
                      format_rounded(d.delta, p), d.significant_a ? "true" : "false", d.significant_b ? "true" : "false"});
    }
    files.push_back({"comparison.csv", cmp});
  }
  return files;
}

inline std::string render_markdown(const ReportBundle& b) {
  const int p = b.metadata.rounding;
  std::ostringstream out;
  const auto& meta = b.metadata;
  out << "<!-- fairaudit-report schema_version=" << meta.schema_version << " -->\n";
  out << "# Fairness audit report\n\n";
  out << "- cohort: " << meta.cohort << " (" << meta.n_records << " records)\n";
  out << "- seed: " << meta.seed << ", bootstrap replicates: " << meta.n_bootstrap
      << ", alpha: " << detail::format_shortest(meta.alpha) << "\n";
  out << "- toolkit version: " << meta.toolkit_version << ", config hash: " << meta.config_hash << "\n\n";
  out << "Cells show the bootstrap mean of (subgroup metric - attribute average); `*` marks p < "
      << detail::format_shortest(meta.alpha) << ". After-matching cells against several levels are listed as "
      << "`[a, b]` in table order.\n\n";

  auto rule = [&](std::size_t cols) {
    out << '|';
    for (std::size_t i = 0; i < cols; ++i) out << "---|";
    out << '\n';
  };

  out << "## Overall\n\n| Model | Threshold |";
  for (auto m : meta.metrics) out << ' ' << metric_name(m) << " |";
  out << '\n';
  rule(2 + meta.metrics.size());
  for (const auto& m : b.models) {
    out << "| " << detail::model_header(m) << " | " << detail::opt_rounded(m.run.pooled_threshold, p) << " |";
    for (const auto& pm : m.run.pooled) out << ' ' << detail::opt_rounded(pm.value, p) << " |";
    out << '\n';
  }
  out << '\n';

  const bool any_matched = std::any_of(b.models.begin(), b.models.end(), [](const auto& m) { return !m.run.matched.empty(); });
  for (std::size_t mi = 0; mi < meta.metrics.size(); ++mi) {
    const auto metric = meta.metrics[mi];
    out << "## " << metric_name(metric) << ": difference from attribute average\n\n| Attribute | Level |";
    for (const auto& m : b.models) {
      out << ' ' << detail::model_header(m) << ": before matching |";
      if (any_matched) out << ' ' << detail::model_header(m) << ": after matching (PSM) |";
    }
    out << '\n';
    const std::size_t per_model = any_matched ? 2 : 1;
    rule(2 + per_model * b.models.size());
    out << "| Overall | |";
    for (const auto& m : b.models) {
      std::optional<double> v;
      for (const auto& pm : m.run.pooled)
        if (pm.metric == metric) v = pm.value;
      out << ' ' << detail::opt_rounded(v, p) << " |";
      if (any_matched) out << " |";
    }
    out << '\n';
    for (const auto& c : b.models.front().run.subgroups) {
      if (c.metric != metric) continue;
      out << "| " << c.attribute << " | " << c.level << " |";
      for (const auto& m : b.models) {
        const auto* cell = detail::find_cell(m.run, c.attribute, c.level, metric);
        out << ' ' << (cell ? detail::cell_text(*cell, p) : "") << " |";
        if (any_matched) {
          const auto* r = detail::find_matched(m.run, c.attribute, c.level, metric);
          out << ' ' << (r ? detail::matched_text(*r, p) : "") << " |";
        }
      }
      out << '\n';
    }
    out << '\n';
  }

  out << "## Discrepancy summary (max - min of level differences)\n\n| Attribute | Metric |";
  for (const auto& m : b.models) out << ' ' << detail::model_header(m) << ": before |" << ' ' << detail::model_header(m) << ": after |";
  out << '\n';
  rule(2 + 2 * b.models.size());
  std::vector<std::pair<std::string, Metric>> rows;
  for (const auto& m : b.models)
    for (const auto& d : m.discrepancy)
      if (std::find(rows.begin(), rows.end(), std::pair{d.attribute, d.metric}) == rows.end()) rows.emplace_back(d.attribute, d.metric);
  for (const auto& [attribute, metric] : rows) {
    out << "| " << attribute << " | " << metric_name(metric) << " |";
    for (const auto& m : b.models) {
      for (auto cond : {MatchingCondition::kBeforeMatching, MatchingCondition::kAfterMatching}) {
        std::string text;
        for (const auto& d : m.discrepancy)
          if (d.attribute == attribute && d.metric == metric && d.matching == cond) text = format_rounded(d.gap, p);
        out << ' ' << text << " |";
      }
    }
    out << '\n';
  }
  out << '\n';

  if (!b.balance.empty()) {
    out << "## Covariate balance (standardized mean difference)\n\n";
    for (const auto& s : b.balance) {
      out << "### " << s.attribute << ": " << s.level_a << " vs " << s.level_b << " (" << cell_status_name(s.status) << ")\n\n";
      if (!s.treated_level.empty()) {
        out << "treated: " << s.treated_level << ", matched pairs: " << s.matched_pairs
            << ", unmatched treated: " << s.unmatched_treated << "\n\n";
      }
      if (!s.message.empty()) out << s.message << "\n\n";
      if (s.entries.empty()) continue;
      out << "| Covariate | SMD before | SMD after |\n";
      rule(3);
      for (const auto& e : s.entries)
        out << "| " << e.covariate << " | " << detail::opt_rounded(e.smd_before, p) << " | " << detail::opt_rounded(e.smd_after, p) << " |\n";
      out << '\n';
    }
  }

  if (b.comparison) {
    const auto& c = *b.comparison;
    out << "## Model comparison: " << c.model_b << " minus " << c.model_a << "\n\n";
    out << "| Attribute | Level | Metric | Opponent | " << c.model_a << " | " << c.model_b << " | Delta |\n";
    rule(7);
    for (const auto& d : c.deltas) {
      out << "| " << d.attribute << " | " << d.level << " | " << metric_name(d.metric) << " | "
          << (d.opponent.empty() ? "-" : d.opponent) << " | " << format_rounded(d.mean_diff_a, p)
          << (d.significant_a ? "*" : "") << " | " << format_rounded(d.mean_diff_b, p) << (d.significant_b ? "*" : "")
          << " | " << format_rounded(d.delta, p) << " |\n";
    }
    out << '\n';
  }

  bool header_done = false;
  for (const auto& m : b.models) {
    if (m.run.excluded.empty() && m.run.notes.empty()) continue;
    if (!header_done) out << "## Notes\n\n";
    header_done = true;
    for (const auto& e : m.run.excluded)
      out << "- " << m.run.model << ": " << e.attribute << " level " << e.level << " excluded (" << e.reason << ", n = " << e.count << ")\n";
    for (const auto& n : m.run.notes) out << "- " << m.run.model << ": " << n << '\n';
  }
  return out.str();
}

/// Reliability diagram: observed positive fraction against mean score per bin.
inline std::string render_calibration_svg(const ModelReport& m) {
  constexpr double kSize = 420.0, kMargin = 50.0, kPlot = kSize - 2 * kMargin;
  auto fx = [&](double v) { return format_fixed(kMargin + v * kPlot); };
  auto fy = [&](double v) { return format_fixed(kSize - kMargin - v * kPlot); };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"420\" height=\"420\" viewBox=\"0 0 420 420\">\n";
  s << "<!-- fairaudit-calibration schema_version=" << kReportSchemaVersion << " -->\n";
  s << "<rect width=\"420\" height=\"420\" fill=\"white\"/>\n";
  s << "<text x=\"210\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">Calibration: "
    << m.run.model << "</text>\n";
  s << "<line x1=\"" << fx(0) << "\" y1=\"" << fy(0) << "\" x2=\"" << fx(1) << "\" y2=\"" << fy(0) << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << fx(0) << "\" y1=\"" << fy(0) << "\" x2=\"" << fx(0) << "\" y2=\"" << fy(1) << "\" stroke=\"black\"/>\n";
  for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const auto label = format_rounded(t, 2);
    s << "<text x=\"" << fx(t) << "\" y=\"" << format_fixed(kSize - kMargin + 16)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << label << "</text>\n";
    s << "<text x=\"" << format_fixed(kMargin - 6) << "\" y=\"" << fy(t)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << label << "</text>\n";
  }
  s << "<text x=\"210\" y=\"405\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">mean predicted score</text>\n";
  s << "<text x=\"14\" y=\"210\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
       "transform=\"rotate(-90 14 210)\">observed positive fraction</text>\n";
  s << "<line x1=\"" << fx(0) << "\" y1=\"" << fy(0) << "\" x2=\"" << fx(1) << "\" y2=\"" << fy(1)
    << "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
  if (!m.calibration.bins.empty()) {
    s << "<polyline fill=\"none\" stroke=\"steelblue\" points=\"";
    for (std::size_t k = 0; k < m.calibration.bins.size(); ++k) {
      const auto& bin = m.calibration.bins[k];
      s << (k ? " " : "") << fx(bin.mean_score) << ',' << fy(bin.positive_fraction);
    }
    s << "\"/>\n";
  }
  for (const auto& bin : m.calibration.bins)
    s << "<circle cx=\"" << fx(bin.mean_score) << "\" cy=\"" << fy(bin.positive_fraction)
      << "\" r=\"4\" fill=\"steelblue\"><title>n = " << bin.count << "</title></circle>\n";
  s << "</svg>\n";
  return s.str();
}

namespace detail {

inline std::string safe_file_stem(std::string_view name) {
  std::string out;
  for (char c : name) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out.empty() ? "model" : out;
}

}  // namespace detail

inline std::vector<RenderedFile> render(const ReportBundle& b, ReportFormat format) {
  switch (format) {
    case ReportFormat::kJson: return {{"report.json", render_json(b)}};
    case ReportFormat::kCsv: return render_csv(b);
    case ReportFormat::kMarkdown: return {{"report.md", render_markdown(b)}};
    case ReportFormat::kSvgCalibration: {
      std::vector<RenderedFile> files;
      for (const auto& m : b.models)
        files.push_back({"calibration_" + detail::safe_file_stem(m.run.model) + ".svg", render_calibration_svg(m)});
      return files;
    }
  }
  return {};
}

/// Writes text files into `dir` (created if needed). Throws IoError.
inline std::vector<std::filesystem::path> write_files(const std::filesystem::path& dir, const std::vector<RenderedFile>& files) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  std::vector<std::filesystem::path> written;
  for (const auto& f : files) {
    const auto path = dir / f.name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << f.content;
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
    written.push_back(path);
  }
  return written;
}

}  // namespace fairaudit
