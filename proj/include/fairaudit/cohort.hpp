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
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include "fairaudit/error.hpp"

namespace fairaudit {

inline constexpr int kCohortSchemaVersion = 1;
inline constexpr std::string_view kMissingLevel = "NA";

enum class ProtectedKind { kCategorical, kContinuous };
enum class CovariateKind { kNumeric, kBinary, kCategorical };

struct ScoreColumn {
  std::string model;
  std::string column;
  bool operator==(const ScoreColumn&) const = default;
};

// A protected attribute read from the column of the same name. Continuous
// attributes are binned at parse time: by `edges` when given, else tertiles.
struct ProtectedColumn {
  std::string name;
  ProtectedKind kind = ProtectedKind::kCategorical;
  std::vector<double> edges;
  bool operator==(const ProtectedColumn&) const = default;
};

struct CovariateColumn {
  std::string name;
  CovariateKind kind = CovariateKind::kNumeric;
  bool operator==(const CovariateColumn&) const = default;
};

struct CohortSchema {
  std::string id_column = "id";
  std::string label_column = "label";
  std::vector<ScoreColumn> score_columns;
  std::vector<ProtectedColumn> protected_columns;
  std::vector<CovariateColumn> covariate_columns;
  std::vector<std::string> missing_tokens{"NA", ""};
  char delimiter = ',';

  bool operator==(const CohortSchema&) const = default;

  // Throws SchemaError when column names collide or required parts are absent.
  void validate() const {
    std::vector<ValidationIssue> issues;
    std::unordered_set<std::string> seen;
    auto claim = [&](const std::string& column, const char* role) {
      if (column.empty()) {
        issues.push_back({0, column, std::string("empty column name for ") + role});
      } else if (!seen.insert(column).second) {
        issues.push_back({0, column, "column named more than once in schema"});
      }
    };
    claim(id_column, "id");
    claim(label_column, "label");
    if (score_columns.empty()) issues.push_back({0, "", "schema has no score columns"});
    std::unordered_set<std::string> models;
    for (const auto& s : score_columns) {
      claim(s.column, "score");
      if (!models.insert(s.model).second)
        issues.push_back({0, s.column, "duplicate model name '" + s.model + "'"});
    }
    for (const auto& p : protected_columns) {
      claim(p.name, "protected attribute");
      for (std::size_t i = 1; i < p.edges.size(); ++i) {
        if (!(p.edges[i - 1] < p.edges[i]))
          issues.push_back({0, p.name, "bin edges must be strictly increasing"});
      }
      if (p.edges.size() == 1) issues.push_back({0, p.name, "need at least two bin edges"});
    }
    for (const auto& c : covariate_columns) claim(c.name, "covariate");
    if (missing_tokens.empty()) issues.push_back({0, "", "missing_tokens must not be empty"});
    if (!issues.empty()) throw SchemaError("invalid cohort schema: " + issues.front().message, issues);
  }

  std::optional<std::size_t> score_index(std::string_view model) const {
    for (std::size_t i = 0; i < score_columns.size(); ++i)
      if (score_columns[i].model == model) return i;
    return std::nullopt;
  }
  std::optional<std::size_t> protected_index(std::string_view name) const {
    for (std::size_t i = 0; i < protected_columns.size(); ++i)
      if (protected_columns[i].name == name) return i;
    return std::nullopt;
  }
  std::optional<std::size_t> covariate_index(std::string_view name) const {
    for (std::size_t i = 0; i < covariate_columns.size(); ++i)
      if (covariate_columns[i].name == name) return i;
    return std::nullopt;
  }
};

struct Missing {
  bool operator==(const Missing&) const = default;
};

// Numeric and binary covariates hold a double (binary as 0/1); categorical
// covariates hold their label.
using CovariateValue = std::variant<Missing, double, std::string>;

inline bool is_missing(const CovariateValue& v) { return std::holds_alternative<Missing>(v); }

// Vectors are aligned with the corresponding schema column lists.
struct CohortRecord {
  std::string id;
  int label = 0;
  std::vector<std::optional<double>> scores;
  std::vector<std::optional<std::string>> protected_levels;
  std::vector<std::optional<double>> protected_raw;
  std::vector<CovariateValue> covariates;

  bool operator==(const CohortRecord&) const = default;
};

struct Cohort {
  std::vector<CohortRecord> records;
  CohortSchema schema;
  // Per protected column: distinct non-missing levels in first-appearance order.
  std::vector<std::vector<std::string>> attribute_levels;

  bool operator==(const Cohort&) const = default;

  std::size_t size() const { return records.size(); }

  const std::vector<std::string>& levels(std::string_view attribute) const {
    auto idx = schema.protected_index(attribute);
    if (!idx) throw ValidationError("unknown protected attribute '" + std::string(attribute) + "'");
    return attribute_levels[*idx];
  }
};

struct ParsedCohort {
  Cohort cohort;
  // Rows dropped because the label or every score was missing.
  std::vector<ValidationIssue> rejected;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits one line of delimited text. Double-quoted fields may contain the
// delimiter; a doubled quote inside quotes is a literal quote.
inline std::vector<std::string> split_fields(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.emplace_back(trim(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.emplace_back(trim(field));
  return out;
}

inline std::string quote_field(std::string_view value, char delim) {
  if (value.find(delim) == std::string_view::npos && value.find('"') == std::string_view::npos &&
      value.find('\n') == std::string_view::npos)
    return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return value;
}

// Shortest decimal text that parses back to the same double.
inline std::string format_shortest(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace detail

// --- binning ---------------------------------------------------------------

struct BinStrategy {
  // Empty means tertiles of the observed values.
  std::vector<double> edges;

  static BinStrategy tertiles() { return {}; }
  static BinStrategy explicit_edges(std::vector<double> e) { return {std::move(e)}; }
  bool is_tertiles() const { return edges.empty(); }
};

struct BinResult {
  std::vector<std::optional<std::string>> labels;
  std::vector<double> edges;
};

inline std::string bin_label(double lo, double hi, bool last) {
  return "[" + detail::format_shortest(lo) + " - " + detail::format_shortest(hi) + (last ? "]" : ")");
}

/// Bins numeric values into labelled intervals. Intervals are left-closed and
/// right-open except the last, which is closed. Tertile cut points are the
/// nearest-rank 1/3 and 2/3 empirical quantiles, so the result depends only
/// on the multiset of values. Values outside explicit edges become MISSING.
inline BinResult bin_continuous(std::span<const std::optional<double>> values, const BinStrategy& strategy) {
  std::vector<double> edges = strategy.edges;
  if (strategy.is_tertiles()) {
    std::vector<double> present;
    for (const auto& v : values)
      if (v) present.push_back(*v);
    if (present.empty()) throw ValidationError("cannot bin: all values are missing");
    if (present.size() < 3) throw ValidationError("tertile binning needs at least 3 non-missing values");
    std::sort(present.begin(), present.end());
    const std::size_t n = present.size();
    auto nearest_rank = [&](std::size_t num, std::size_t den) {
      std::size_t k = (num * n + den - 1) / den;  // ceil(p * n)
      return present[std::max<std::size_t>(k, 1) - 1];
    };
    const double q1 = nearest_rank(1, 3);
    const double q2 = nearest_rank(2, 3);
    const double lo = present.front();
    const double hi = present.back();
    if (!(lo < q1 && q1 < q2 && q2 < hi)) {
      throw ValidationError(
          "degenerate tertiles (ties at a cut point); supply explicit bin edges for this attribute");
    }
    edges = {lo, q1, q2, hi};
  } else {
    if (edges.size() < 2) throw ValidationError("need at least two bin edges");
    for (std::size_t i = 1; i < edges.size(); ++i)
      if (!(edges[i - 1] < edges[i])) throw ValidationError("bin edges must be strictly increasing");
    bool any = false;
    for (const auto& v : values) any = any || v.has_value();
    if (!any) throw ValidationError("cannot bin: all values are missing");
  }

  const std::size_t bins = edges.size() - 1;
  std::vector<std::string> names;
  for (std::size_t b = 0; b < bins; ++b) names.push_back(bin_label(edges[b], edges[b + 1], b + 1 == bins));

  BinResult out;
  out.edges = edges;
  out.labels.reserve(values.size());
  for (const auto& v : values) {
    if (!v || *v < edges.front() || *v > edges.back() || std::isnan(*v)) {
      out.labels.emplace_back(std::nullopt);
      continue;
    }
    // First edge strictly greater than v closes v's bin.
    auto it = std::upper_bound(edges.begin(), edges.end(), *v);
    std::size_t b = static_cast<std::size_t>(it - edges.begin());
    b = b == 0 ? 0 : b - 1;
    if (b >= bins) b = bins - 1;
    out.labels.emplace_back(names[b]);
  }
  return out;
}

// --- parsing ---------------------------------------------------------------

namespace detail {

inline void assign_levels(Cohort& cohort) {
  cohort.attribute_levels.assign(cohort.schema.protected_columns.size(), {});
  for (std::size_t a = 0; a < cohort.schema.protected_columns.size(); ++a) {
    std::unordered_set<std::string> seen;
    for (const auto& r : cohort.records) {
      const auto& lvl = r.protected_levels[a];
      if (lvl && seen.insert(*lvl).second) cohort.attribute_levels[a].push_back(*lvl);
    }
    if (cohort.schema.protected_columns[a].kind == ProtectedKind::kContinuous) {
      // Bin labels read "[lo - hi)": order by lower edge.
      auto lower = [](const std::string& label) {
        const auto dash = label.find(" - ");
        return parse_double(std::string_view(label).substr(1, dash == std::string::npos ? 0 : dash - 1)).value_or(0.0);
      };
      auto& lv = cohort.attribute_levels[a];
      std::stable_sort(lv.begin(), lv.end(), [&](const auto& x, const auto& y) { return lower(x) < lower(y); });
    }
  }
}

// Bins continuous protected columns from their raw values.
inline void bin_protected(Cohort& cohort) {
  for (std::size_t a = 0; a < cohort.schema.protected_columns.size(); ++a) {
    const auto& col = cohort.schema.protected_columns[a];
    if (col.kind != ProtectedKind::kContinuous) continue;
    std::vector<std::optional<double>> raw;
    raw.reserve(cohort.records.size());
    for (const auto& r : cohort.records) raw.push_back(r.protected_raw[a]);
    if (raw.empty()) continue;
    BinResult bins;
    try {
      bins = bin_continuous(raw, BinStrategy{col.edges});
    } catch (const ValidationError& e) {
      throw ValidationError("protected attribute '" + col.name + "': " + e.what());
    }
    for (std::size_t i = 0; i < cohort.records.size(); ++i)
      cohort.records[i].protected_levels[a] = bins.labels[i];
  }
}

}  // namespace detail

/// Reads a header-first delimited cohort file. Leading lines starting with
/// '#' are treated as comments. Throws SchemaError for header problems,
/// RowError (carrying every offending row) for bad labels or scores and
/// ValidationError for duplicate ids.
inline ParsedCohort parse_cohort(std::istream& in, const CohortSchema& schema) {
  schema.validate();
  const std::unordered_set<std::string> missing(schema.missing_tokens.begin(), schema.missing_tokens.end());
  auto is_missing_token = [&](const std::string& s) { return missing.count(s) > 0; };

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    header = detail::split_fields(line, schema.delimiter);
    break;
  }
  if (header.empty()) throw SchemaError("cohort file has no header row");

  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) position.emplace(header[i], i);
  std::vector<std::string> absent;
  auto locate = [&](const std::string& name) -> std::size_t {
    auto it = position.find(name);
    if (it == position.end()) {
      absent.push_back(name);
      return 0;
    }
    return it->second;
  };
  const std::size_t id_pos = locate(schema.id_column);
  const std::size_t label_pos = locate(schema.label_column);
  std::vector<std::size_t> score_pos, protected_pos, covariate_pos;
  for (const auto& s : schema.score_columns) score_pos.push_back(locate(s.column));
  for (const auto& p : schema.protected_columns) protected_pos.push_back(locate(p.name));
  for (const auto& c : schema.covariate_columns) covariate_pos.push_back(locate(c.name));
  if (!absent.empty()) {
    std::string names;
    std::vector<ValidationIssue> issues;
    for (const auto& a : absent) {
      names += (names.empty() ? "" : ", ") + a;
      issues.push_back({1, a, "column missing from header"});
    }
    throw SchemaError("cohort header is missing columns: " + names, issues);
  }

  ParsedCohort result;
  Cohort& cohort = result.cohort;
  cohort.schema = schema;
  std::vector<ValidationIssue> errors;
  std::unordered_map<std::string, std::size_t> id_line;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_fields(line, schema.delimiter);
    if (fields.size() != header.size()) {
      errors.push_back({line_no, "", "expected " + std::to_string(header.size()) + " fields, found " +
                                         std::to_string(fields.size())});
      continue;
    }
    CohortRecord rec;
    rec.id = fields[id_pos];
    bool row_ok = true;
    if (rec.id.empty() || is_missing_token(rec.id)) {
      errors.push_back({line_no, schema.id_column, "missing record id"});
      row_ok = false;
    }

    const std::string& label_text = fields[label_pos];
    bool label_missing = is_missing_token(label_text);
    if (!label_missing) {
      auto v = detail::parse_double(label_text);
      if (!v || !(*v == 0.0 || *v == 1.0)) {
        errors.push_back({line_no, schema.label_column, "label '" + label_text + "' is not 0 or 1"});
        row_ok = false;
      } else {
        rec.label = static_cast<int>(*v);
      }
    }

    bool any_score = false;
    for (std::size_t s = 0; s < score_pos.size(); ++s) {
      const std::string& text = fields[score_pos[s]];
      if (is_missing_token(text)) {
        rec.scores.emplace_back(std::nullopt);
        continue;
      }
      auto v = detail::parse_double(text);
      if (!v) {
        errors.push_back({line_no, schema.score_columns[s].column, "score '" + text + "' is not a number"});
        row_ok = false;
        rec.scores.emplace_back(std::nullopt);
      } else if (!std::isfinite(*v) || *v < 0.0 || *v > 1.0) {
        errors.push_back({line_no, schema.score_columns[s].column, "score out of [0,1]: " + text});
        row_ok = false;
        rec.scores.emplace_back(std::nullopt);
      } else {
        rec.scores.emplace_back(*v);
        any_score = true;
      }
    }

    for (std::size_t p = 0; p < protected_pos.size(); ++p) {
      const auto& col = schema.protected_columns[p];
      const std::string& text = fields[protected_pos[p]];
      if (is_missing_token(text)) {
        rec.protected_levels.emplace_back(std::nullopt);
        rec.protected_raw.emplace_back(std::nullopt);
      } else if (col.kind == ProtectedKind::kCategorical) {
        rec.protected_levels.emplace_back(text);
        rec.protected_raw.emplace_back(std::nullopt);
      } else {
        auto v = detail::parse_double(text);
        if (!v || !std::isfinite(*v)) {
          errors.push_back({line_no, col.name, "value '" + text + "' is not a number"});
          row_ok = false;
        }
        rec.protected_levels.emplace_back(std::nullopt);
        rec.protected_raw.emplace_back(v);
      }
    }

    for (std::size_t c = 0; c < covariate_pos.size(); ++c) {
      const auto& col = schema.covariate_columns[c];
      const std::string& text = fields[covariate_pos[c]];
      if (is_missing_token(text)) {
        rec.covariates.emplace_back(Missing{});
        continue;
      }
      if (col.kind == CovariateKind::kCategorical) {
        rec.covariates.emplace_back(text);
        continue;
      }
      auto v = detail::parse_double(text);
      if (!v || !std::isfinite(*v)) {
        errors.push_back({line_no, col.name, "value '" + text + "' is not a number"});
        row_ok = false;
        rec.covariates.emplace_back(Missing{});
      } else if (col.kind == CovariateKind::kBinary && !(*v == 0.0 || *v == 1.0)) {
        errors.push_back({line_no, col.name, "binary value '" + text + "' is not 0 or 1"});
        row_ok = false;
        rec.covariates.emplace_back(Missing{});
      } else {
        rec.covariates.emplace_back(*v);
      }
    }

    if (!row_ok) continue;
    if (label_missing) {
      result.rejected.push_back({line_no, schema.label_column, "row rejected: missing label"});
      continue;
    }
    if (!any_score) {
      result.rejected.push_back({line_no, "", "row rejected: every score is missing"});
      continue;
    }
    auto [it, fresh] = id_line.emplace(rec.id, line_no);
    if (!fresh) {
      errors.push_back({line_no, schema.id_column,
                        "duplicate id '" + rec.id + "' (first seen on line " + std::to_string(it->second) + ")"});
      continue;
    }
    cohort.records.push_back(std::move(rec));
  }

  if (!errors.empty()) {
    const auto& first = errors.front();
    const bool only_duplicates = std::all_of(errors.begin(), errors.end(), [](const ValidationIssue& i) {
      return i.message.rfind("duplicate id", 0) == 0;
    });
    std::string what = "line " + std::to_string(first.line) + (first.column.empty() ? "" : ", column " + first.column) +
                       ": " + first.message;
    if (errors.size() > 1) what += " (and " + std::to_string(errors.size() - 1) + " more)";
    if (only_duplicates) throw ValidationError(what, errors);
    throw RowError(what, errors);
  }

  detail::bin_protected(cohort);
  detail::assign_levels(cohort);
  return result;
}

inline ParsedCohort parse_cohort_file(const std::string& path, const CohortSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open cohort file '" + path + "'");
  return parse_cohort(in, schema);
}

/// Writes a cohort in the format parse_cohort reads. Continuous protected
/// columns are written as raw values so re-parsing re-derives the same bins.
inline void write_cohort(std::ostream& out, const Cohort& cohort) {
  const auto& schema = cohort.schema;
  const char d = schema.delimiter;
  const std::string& missing = schema.missing_tokens.front();
  out << "# fairaudit-cohort schema_version=" << kCohortSchemaVersion << '\n';
  std::vector<std::string> header{schema.id_column, schema.label_column};
  for (const auto& s : schema.score_columns) header.push_back(s.column);
  for (const auto& p : schema.protected_columns) header.push_back(p.name);
  for (const auto& c : schema.covariate_columns) header.push_back(c.name);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? std::string(1, d) : "") << detail::quote_field(header[i], d);
  out << '\n';
  for (const auto& r : cohort.records) {
    out << detail::quote_field(r.id, d) << d << r.label;
    for (const auto& s : r.scores) out << d << (s ? detail::format_shortest(*s) : missing);
    for (std::size_t p = 0; p < schema.protected_columns.size(); ++p) {
      out << d;
      if (schema.protected_columns[p].kind == ProtectedKind::kContinuous) {
        out << (r.protected_raw[p] ? detail::format_shortest(*r.protected_raw[p]) : missing);
      } else {
        out << (r.protected_levels[p] ? detail::quote_field(*r.protected_levels[p], d) : missing);
      }
    }
    for (const auto& c : r.covariates) {
      out << d;
      if (const auto* num = std::get_if<double>(&c)) {
        out << detail::format_shortest(*num);
      } else if (const auto* str = std::get_if<std::string>(&c)) {
        out << detail::quote_field(*str, d);
      } else {
        out << missing;
      }
    }
    out << '\n';
  }
}

/// Assembles a Cohort from in-memory records (binning continuous protected
/// columns and deriving attribute levels). Throws ValidationError on
/// duplicate ids or out-of-range labels/scores.
inline Cohort make_cohort(CohortSchema schema, std::vector<CohortRecord> records) {
  schema.validate();
  std::unordered_set<std::string> ids;
  for (const auto& r : records) {
    if (!ids.insert(r.id).second) throw ValidationError("duplicate id '" + r.id + "'");
    if (r.label != 0 && r.label != 1) throw ValidationError("label of '" + r.id + "' is not 0 or 1");
    if (r.scores.size() != schema.score_columns.size() || r.protected_levels.size() != schema.protected_columns.size() ||
        r.protected_raw.size() != schema.protected_columns.size() ||
        r.covariates.size() != schema.covariate_columns.size())
      throw ValidationError("record '" + r.id + "' does not match the schema");
    for (const auto& s : r.scores)
      if (s && !(*s >= 0.0 && *s <= 1.0)) throw ValidationError("score of '" + r.id + "' out of [0,1]");
  }
  Cohort cohort;
  cohort.schema = std::move(schema);
  cohort.records = std::move(records);
  detail::bin_protected(cohort);
  detail::assign_levels(cohort);
  return cohort;
}

// --- subgroups -------------------------------------------------------------

struct SubgroupPartition {
  struct Group {
    std::string level;
    std::vector<std::size_t> indices;
    bool operator==(const Group&) const = default;
  };
  struct Excluded {
    std::string level;
    std::size_t count = 0;
    std::string reason;
    bool operator==(const Excluded&) const = default;
  };

  std::string attribute;
  std::vector<Group> groups;
  std::vector<Excluded> excluded;

  // Level position per record (index into groups), or -1 when excluded.
  std::vector<int> membership(std::size_t n_records) const {
    std::vector<int> m(n_records, -1);
    for (std::size_t g = 0; g < groups.size(); ++g)
      for (auto i : groups[g].indices) m[i] = static_cast<int>(g);
    return m;
  }
};

/// Splits the cohort by one protected attribute. Observed levels keep their
/// first-appearance order and MISSING values form a trailing "NA" level.
/// Levels smaller than `min_group_size` are excluded with a reason.
inline SubgroupPartition subgroup_partition(const Cohort& cohort, std::string_view attribute,
                                            std::size_t min_group_size) {
  auto idx = cohort.schema.protected_index(attribute);
  if (!idx) throw ValidationError("unknown protected attribute '" + std::string(attribute) + "'");
  const auto& levels = cohort.attribute_levels[*idx];
  std::unordered_map<std::string, std::size_t> slot;
  for (std::size_t l = 0; l < levels.size(); ++l) slot.emplace(levels[l], l);

  std::vector<std::vector<std::size_t>> members(levels.size());
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < cohort.records.size(); ++i) {
    const auto& lvl = cohort.records[i].protected_levels[*idx];
    if (lvl) {
      members[slot.at(*lvl)].push_back(i);
    } else {
      missing.push_back(i);
    }
  }

  SubgroupPartition part;
  part.attribute = std::string(attribute);
  for (std::size_t l = 0; l < levels.size(); ++l) {
    if (members[l].size() >= min_group_size) {
      part.groups.push_back({levels[l], std::move(members[l])});
    } else {
      part.excluded.push_back({levels[l], members[l].size(), "too small"});
    }
  }
  if (!missing.empty()) {
    if (missing.size() >= min_group_size && slot.find(std::string(kMissingLevel)) == slot.end()) {
      part.groups.push_back({std::string(kMissingLevel), std::move(missing)});
    } else {
      part.excluded.push_back({std::string(kMissingLevel), missing.size(), "missing"});
    }
  }
  if (part.groups.size() < 2) {
    throw ValidationError("attribute '" + part.attribute + "': nothing to compare (" +
                          std::to_string(part.groups.size()) + " level(s) with at least " +
                          std::to_string(min_group_size) + " records)");
  }
  return part;
}

}  // namespace fairaudit
