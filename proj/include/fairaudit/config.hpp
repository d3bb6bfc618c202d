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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairaudit/audit.hpp"
#include "fairaudit/cohort.hpp"
#include "fairaudit/error.hpp"
#include "fairaudit/report.hpp"

namespace fairaudit {

inline constexpr int kConfigSchemaVersion = 1;

// --- cohort schema <-> JSON ---------------------------------------------------

inline nlohmann::ordered_json schema_to_json(const CohortSchema& s) {
  nlohmann::ordered_json j;
  j["schema_version"] = kCohortSchemaVersion;
  j["id"] = s.id_column;
  j["label"] = s.label_column;
  j["delimiter"] = std::string(1, s.delimiter);
  j["missing_tokens"] = s.missing_tokens;
  auto& scores = j["scores"] = nlohmann::ordered_json::array();
  for (const auto& c : s.score_columns) scores.push_back({{"model", c.model}, {"column", c.column}});
  auto& prot = j["protected"] = nlohmann::ordered_json::array();
  for (const auto& p : s.protected_columns) {
    nlohmann::ordered_json pj;
    pj["name"] = p.name;
    pj["kind"] = p.kind == ProtectedKind::kCategorical ? "categorical" : "continuous";
    if (!p.edges.empty()) pj["edges"] = p.edges;
    prot.push_back(std::move(pj));
  }
  auto& covs = j["covariates"] = nlohmann::ordered_json::array();
  for (const auto& c : s.covariate_columns) {
    const char* kind = c.kind == CovariateKind::kNumeric ? "numeric" : c.kind == CovariateKind::kBinary ? "binary" : "categorical";
    covs.push_back({{"name", c.name}, {"kind", kind}});
  }
  return j;
}

inline CohortSchema schema_from_json(const nlohmann::ordered_json& j) {
  try {
    CohortSchema s;
    if (j.contains("schema_version") && j.at("schema_version").get<int>() != kCohortSchemaVersion)
      throw SchemaError("unsupported cohort schema_version " + std::to_string(j.at("schema_version").get<int>()));
    s.id_column = j.value("id", s.id_column);
    s.label_column = j.value("label", s.label_column);
    const auto delim = j.value("delimiter", std::string(","));
    if (delim.size() != 1) throw SchemaError("delimiter must be a single character");
    s.delimiter = delim[0];
    s.missing_tokens = j.value("missing_tokens", s.missing_tokens);
    for (const auto& c : j.at("scores")) {
      if (c.is_string()) {
        s.score_columns.push_back({c.get<std::string>(), c.get<std::string>()});
      } else {
        const auto model = c.at("model").get<std::string>();
        s.score_columns.push_back({model, c.value("column", model)});
      }
    }
    for (const auto& p : j.value("protected", nlohmann::ordered_json::array())) {
      ProtectedColumn pc;
      pc.name = p.at("name").get<std::string>();
      const auto kind = p.value("kind", "categorical");
      if (kind == "categorical") pc.kind = ProtectedKind::kCategorical;
      else if (kind == "continuous") pc.kind = ProtectedKind::kContinuous;
      else throw SchemaError("protected column '" + pc.name + "': unknown kind '" + kind + "'");
      pc.edges = p.value("edges", std::vector<double>{});
      s.protected_columns.push_back(std::move(pc));
    }
    for (const auto& c : j.value("covariates", nlohmann::ordered_json::array())) {
      CovariateColumn cc;
      cc.name = c.at("name").get<std::string>();
      const auto kind = c.value("kind", "numeric");
      if (kind == "numeric") cc.kind = CovariateKind::kNumeric;
      else if (kind == "binary") cc.kind = CovariateKind::kBinary;
      else if (kind == "categorical") cc.kind = CovariateKind::kCategorical;
      else throw SchemaError("covariate '" + cc.name + "': unknown kind '" + kind + "'");
      s.covariate_columns.push_back(std::move(cc));
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("cohort schema: ") + e.what());
  }
}

inline nlohmann::ordered_json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// --- run configuration ----------------------------------------------------------

/// Everything an audit run needs. Relative paths are resolved against the
/// directory of the config file.
struct RunConfig {
  std::filesystem::path cohort_path;
  CohortSchema schema;
  std::vector<ModelSpec> models;  // empty: every score column, no roles
  AuditConfig audit;
  std::filesystem::path output_dir = "fairaudit-out";
  std::vector<ReportFormat> formats{ReportFormat::kJson, ReportFormat::kCsv, ReportFormat::kMarkdown,
                                    ReportFormat::kSvgCalibration};

  void validate() const {
    audit.validate();
    if (formats.empty()) throw ConfigError("at least one report format is required");
    if (cohort_path.empty()) throw ConfigError("config names no cohort file");
  }

  std::vector<ModelSpec> resolved_models() const {
    if (!models.empty()) {
      for (const auto& m : models)
        if (!schema.score_index(m.model)) throw ConfigError("unknown model / score column '" + m.model + "'");
      return models;
    }
    std::vector<ModelSpec> out;
    for (const auto& c : schema.score_columns) out.push_back({c.model, std::nullopt});
    return out;
  }
};

namespace detail {

inline std::optional<ModelRole> parse_role(const std::string& s) {
  if (s == "with_protected" || s == role_name(ModelRole::kWithProtected)) return ModelRole::kWithProtected;
  if (s == "without_protected" || s == role_name(ModelRole::kWithoutProtected)) return ModelRole::kWithoutProtected;
  return std::nullopt;
}

}  // namespace detail

/// Reads the audit section of a config into an AuditConfig; missing keys
/// keep their defaults.
inline AuditConfig audit_config_from_json(const nlohmann::ordered_json& a) {
  AuditConfig c;
  if (a.contains("metrics")) {
    c.metrics.clear();
    for (const auto& m : a.at("metrics")) {
      auto metric = parse_metric(m.get<std::string>());
      if (!metric) throw ConfigError("unknown metric '" + m.get<std::string>() + "'");
      c.metrics.push_back(*metric);
    }
  }
  c.n_bootstrap = a.value("n_bootstrap", c.n_bootstrap);
  c.alpha = a.value("alpha", c.alpha);
  c.seed = a.value("seed", c.seed);
  if (a.contains("threshold")) {
    const auto& t = a.at("threshold");
    if (t.is_string()) {
      if (t.get<std::string>() != "youden") throw ConfigError("threshold must be \"youden\" or a number");
      c.threshold.youden_pooled_per_replicate = true;
    } else {
      c.threshold.youden_pooled_per_replicate = false;
      c.threshold.fixed = t.get<double>();
    }
  }
  c.attributes = a.value("attributes", c.attributes);
  c.propensity_covariates = a.value("propensity_covariates", c.propensity_covariates);
  if (a.contains("caliper_multiplier")) {
    const auto& cm = a.at("caliper_multiplier");
    c.caliper_multiplier = cm.is_null() ? std::nullopt : std::optional<double>(cm.get<double>());
  }
  c.min_group_size = a.value("min_group_size", c.min_group_size);
  c.min_matched_n = a.value("min_matched_n", c.min_matched_n);
  c.rounding = a.value("rounding", c.rounding);
  c.workers = a.value("workers", c.workers);
  c.fit.ridge = a.value("ridge", c.fit.ridge);
  c.fit.max_iter = a.value("max_iter", c.fit.max_iter);
  c.fit.tol = a.value("tol", c.fit.tol);
  return c;
}

inline nlohmann::ordered_json audit_config_to_json(const AuditConfig& c, bool include_workers = true) {
  nlohmann::ordered_json a;
  a["metrics"] = nlohmann::ordered_json::array();
  for (auto m : c.metrics) a["metrics"].push_back(metric_name(m));
  a["n_bootstrap"] = c.n_bootstrap;
  a["alpha"] = c.alpha;
  a["seed"] = c.seed;
  if (c.threshold.youden_pooled_per_replicate) a["threshold"] = "youden";
  else a["threshold"] = c.threshold.fixed;
  a["attributes"] = c.attributes;
  a["propensity_covariates"] = c.propensity_covariates;
  a["caliper_multiplier"] = c.caliper_multiplier ? nlohmann::ordered_json(*c.caliper_multiplier) : nlohmann::ordered_json(nullptr);
  a["min_group_size"] = c.min_group_size;
  a["min_matched_n"] = c.min_matched_n;
  a["rounding"] = c.rounding;
  if (include_workers) a["workers"] = c.workers;
  a["ridge"] = c.fit.ridge;
  a["max_iter"] = c.fit.max_iter;
  a["tol"] = c.fit.tol;
  return a;
}

/// Parses a run config document. `base_dir` anchors relative paths.
inline RunConfig run_config_from_json(const nlohmann::ordered_json& j, const std::filesystem::path& base_dir) {
  try {
    if (j.contains("schema_version") && j.at("schema_version").get<int>() != kConfigSchemaVersion)
      throw ConfigError("unsupported config schema_version " + std::to_string(j.at("schema_version").get<int>()));
    auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return path.is_absolute() ? path : base_dir / path;
    };
    RunConfig rc;
    rc.cohort_path = resolve(j.at("cohort").get<std::string>());
    if (j.contains("schema")) {
      rc.schema = schema_from_json(j.at("schema"));
    } else if (j.contains("schema_file")) {
      rc.schema = schema_from_json(read_json_file(resolve(j.at("schema_file").get<std::string>())));
    } else {
      throw ConfigError("config needs either \"schema\" or \"schema_file\"");
    }
    for (const auto& m : j.value("models", nlohmann::ordered_json::array())) {
      ModelSpec spec;
      if (m.is_string()) {
        spec.model = m.get<std::string>();
      } else {
        spec.model = m.at("name").get<std::string>();
        if (m.contains("role")) {
          spec.role = detail::parse_role(m.at("role").get<std::string>());
          if (!spec.role) throw ConfigError("model '" + spec.model + "': role must be with_protected or without_protected");
        }
      }
      rc.models.push_back(std::move(spec));
    }
    if (j.contains("audit")) rc.audit = audit_config_from_json(j.at("audit"));
    if (j.contains("output")) {
      const auto& o = j.at("output");
      if (o.contains("dir")) rc.output_dir = resolve(o.at("dir").get<std::string>());
      if (o.contains("formats")) {
        rc.formats.clear();
        for (const auto& f : o.at("formats")) {
          auto fmt = parse_format(f.get<std::string>());
          if (!fmt) throw ConfigError("unknown report format '" + f.get<std::string>() + "'");
          rc.formats.push_back(*fmt);
        }
      }
    } else {
      rc.output_dir = base_dir / rc.output_dir;
    }
    rc.validate();
    return rc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  return run_config_from_json(read_json_file(path), path.parent_path());
}

/// Canonical text of the settings that determine report content (no
/// worker count, no output location) and its digest.
inline std::string canonical_config_text(const RunConfig& rc) {
  nlohmann::ordered_json j;
  j["cohort"] = rc.cohort_path.filename().string();
  j["schema"] = schema_to_json(rc.schema);
  j["models"] = nlohmann::ordered_json::array();
  for (const auto& m : rc.resolved_models())
    j["models"].push_back({{"name", m.model}, {"role", m.role ? nlohmann::ordered_json(role_name(*m.role)) : nlohmann::ordered_json(nullptr)}});
  j["audit"] = audit_config_to_json(rc.audit, false);
  return j.dump();
}

inline std::string config_hash(const RunConfig& rc) { return fnv1a64_hex(canonical_config_text(rc)); }

}  // namespace fairaudit
