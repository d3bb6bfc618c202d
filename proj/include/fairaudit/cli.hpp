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
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairaudit/audit.hpp"
#include "fairaudit/cohort.hpp"
#include "fairaudit/config.hpp"
#include "fairaudit/error.hpp"
#include "fairaudit/matching.hpp"
#include "fairaudit/report.hpp"
#include "fairaudit/synth.hpp"

namespace fairaudit {

enum ExitCode : int { kExitOk = 0, kExitInternal = 1, kExitValidation = 2, kExitStatistical = 3, kExitIo = 4 };

struct ScalarOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> bootstrap;
  std::optional<double> alpha;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;
  std::vector<std::string> formats;

  void apply(RunConfig& rc) const {
    if (seed) rc.audit.seed = *seed;
    if (bootstrap) rc.audit.n_bootstrap = *bootstrap;
    if (alpha) rc.audit.alpha = *alpha;
    if (workers) rc.audit.workers = *workers;
    if (out) rc.output_dir = *out;
    if (!formats.empty()) {
      rc.formats.clear();
      for (const auto& f : formats) {
        auto fmt = parse_format(f);
        if (!fmt) throw ConfigError("unknown report format '" + f + "'");
        rc.formats.push_back(*fmt);
      }
    }
    rc.validate();
  }
};

namespace detail {

inline void print_issues(std::ostream& err, const std::vector<ValidationIssue>& issues) {
  for (const auto& i : issues) {
    err << "  ";
    if (i.line) err << "line " << i.line << ", ";
    if (!i.column.empty()) err << "column " << i.column << ": ";
    err << i.message << '\n';
  }
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    print_issues(err, e.issues());
    return kExitValidation;
  } catch (const StatisticalError& e) {
    err << "statistical failure: " << e.what() << '\n';
    return kExitStatistical;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

inline Cohort load_cohort(const RunConfig& rc, std::ostream& err) {
  auto parsed = parse_cohort_file(rc.cohort_path.string(), rc.schema);
  if (!parsed.rejected.empty()) {
    err << "warning: " << parsed.rejected.size() << " row(s) rejected\n";
    print_issues(err, parsed.rejected);
  }
  return std::move(parsed.cohort);
}

// Checks names in the config against the cohort; throws ValidationError.
inline void check_config_against(const RunConfig& rc, const Cohort& cohort) {
  rc.audit.resolved_attributes(cohort);
  rc.resolved_models();
  reject_protected(cohort, rc.audit.propensity_covariates);
  for (const auto& c : rc.audit.propensity_covariates) resolve_source(cohort, c);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(std::string(trim(cur)));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty() || !out.empty()) out.push_back(std::string(trim(cur)));
  return out;
}

inline void add_overrides(CLI::App* cmd, ScalarOverrides& o) {
  cmd->add_option("--seed", o.seed, "Override the bootstrap seed");
  cmd->add_option("--bootstrap", o.bootstrap, "Override the number of bootstrap replicates");
  cmd->add_option("--alpha", o.alpha, "Override the significance level");
  cmd->add_option("--workers", o.workers, "Worker threads (0: one per hardware thread)");
  cmd->add_option("--out", o.out, "Override the output directory");
  cmd->add_option("--format", o.formats, "Report formats: json, csv, markdown, svg-calibration");
}

}  // namespace detail

/// Runs an audit from a config file and writes the requested reports.
/// `compare` names two score columns to audit side by side.
inline int cmd_audit(const std::filesystem::path& config_path, const ScalarOverrides& overrides,
                     const std::vector<std::string>& compare, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    auto rc = load_run_config(config_path);
    overrides.apply(rc);
    if (!compare.empty()) {
      if (compare.size() != 2) throw ConfigError("--compare takes exactly two model names");
      std::vector<ModelSpec> chosen;
      for (const auto& name : compare) {
        auto it = std::find_if(rc.models.begin(), rc.models.end(), [&](const auto& m) { return m.model == name; });
        chosen.push_back(it != rc.models.end() ? *it : ModelSpec{name, std::nullopt});
      }
      rc.models = std::move(chosen);
    }
    const auto cohort = detail::load_cohort(rc, err);
    detail::check_config_against(rc, cohort);
    const auto bundle = build_report(cohort, rc.audit, rc.resolved_models(), rc.cohort_path.filename().string(), config_hash(rc));
    for (auto f : rc.formats)
      for (const auto& path : write_files(rc.output_dir, render(bundle, f))) out << "wrote " << path.string() << '\n';
    if (all_cells_insufficient(bundle)) {
      err << "statistical failure: every audit cell is INSUFFICIENT\n";
      return static_cast<int>(kExitStatistical);
    }
    return static_cast<int>(kExitOk);
  });
}

/// Propensity matching only: pairs exports and a balance report per contrast.
inline int cmd_match(const std::filesystem::path& config_path, const ScalarOverrides& overrides, std::ostream& out,
                     std::ostream& err) {
  return detail::guarded(err, [&] {
    auto rc = load_run_config(config_path);
    overrides.apply(rc);
    if (rc.audit.propensity_covariates.empty()) throw ConfigError("matching needs audit.propensity_covariates");
    const auto cohort = detail::load_cohort(rc, err);
    detail::check_config_against(rc, cohort);
    const auto plans = plan_contrasts(cohort, rc.audit);

    ReportBundle bundle;
    std::vector<RenderedFile> files;
    for (const auto& plan : plans) {
      bundle.balance.push_back(balance_section(plan));
      if (plan.match) {
        std::ostringstream pairs;
        write_pairs(pairs, cohort, plan.match->sample);
        files.push_back({"pairs_" + detail::safe_file_stem(plan.attribute) + "_" + detail::safe_file_stem(plan.level_a) +
                             "_vs_" + detail::safe_file_stem(plan.level_b) + ".csv",
                         pairs.str()});
      }
      out << plan.attribute << ": " << plan.level_a << " vs " << plan.level_b << " " << cell_status_name(plan.status);
      if (plan.match) out << " (" << plan.match->sample.pairs.size() << " pairs)";
      if (!plan.message.empty()) out << " - " << plan.message;
      out << '\n';
    }
    nlohmann::ordered_json j;
    j["schema_version"] = kReportSchemaVersion;
    j["kind"] = "fairaudit-balance";
    j["config_hash"] = config_hash(rc);
    j["contrasts"] = to_json(bundle)["balance"];
    files.push_back({"balance.json", j.dump(2) + "\n"});
    for (const auto& f : render_csv(bundle))
      if (f.name == "balance.csv") files.push_back(f);
    for (const auto& path : write_files(rc.output_dir, files)) out << "wrote " << path.string() << '\n';
    return static_cast<int>(kExitOk);
  });
}

/// Generates a synthetic cohort: cohort.csv, schema.json and manifest.json.
inline int cmd_synth(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
                     std::optional<std::uint64_t> seed, std::optional<std::size_t> n, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    auto config = synth_config_from_json(read_json_file(config_path));
    if (seed) config.seed = *seed;
    if (n) config.n = *n;
    const auto generated = generate(config);
    std::ostringstream cohort_text;
    write_cohort(cohort_text, generated.cohort);
    const std::vector<RenderedFile> files{{"cohort.csv", cohort_text.str()},
                                          {"schema.json", schema_to_json(generated.cohort.schema).dump(2) + "\n"},
                                          {"manifest.json", generated.manifest.dump(2) + "\n"}};
    for (const auto& path : write_files(out_dir, files)) out << "wrote " << path.string() << '\n';
    return static_cast<int>(kExitOk);
  });
}

struct TrainSpec {
  std::string model;
  std::vector<std::string> features;
};

/// Stratified train/test split, one logistic model per spec fitted on the
/// training rows, and the scored test rows (or all rows) written out.
inline int cmd_train(const std::filesystem::path& cohort_path, const std::filesystem::path& schema_path,
                     const std::vector<TrainSpec>& specs, double test_fraction, std::uint64_t seed, double ridge,
                     bool keep_all, const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    if (specs.empty()) throw ConfigError("train needs at least one --model name=feature,...");
    const auto schema = schema_from_json(read_json_file(schema_path));
    auto parsed = parse_cohort_file(cohort_path.string(), schema);
    if (!parsed.rejected.empty()) err << "warning: " << parsed.rejected.size() << " row(s) rejected\n";
    Cohort cohort = std::move(parsed.cohort);
    const auto [train, test] = split_train_test(cohort, test_fraction, seed);
    nlohmann::ordered_json models;
    models["schema_version"] = 1;
    models["seed"] = seed;
    models["test_fraction"] = test_fraction;
    models["n_train"] = train.size();
    models["n_test"] = test.size();
    models["models"] = nlohmann::ordered_json::array();
    for (const auto& spec : specs) {
      LogisticModel fitted;
      cohort = demo_train(cohort, train, spec.features, spec.model, ridge, &fitted);
      auto mj = model_to_json(fitted);
      nlohmann::ordered_json entry;
      entry["name"] = spec.model;
      entry["features"] = spec.features;
      entry["fit"] = std::move(mj);
      models["models"].push_back(std::move(entry));
      out << "trained " << spec.model << " on " << train.size() << " records"
          << (fitted.converged ? "" : " (did not converge)") << '\n';
    }
    const Cohort scored = keep_all ? cohort : subset_cohort(cohort, test);
    std::ostringstream cohort_text;
    write_cohort(cohort_text, scored);
    const std::vector<RenderedFile> files{{"cohort.csv", cohort_text.str()},
                                          {"schema.json", schema_to_json(scored.schema).dump(2) + "\n"},
                                          {"models.json", models.dump(2) + "\n"}};
    for (const auto& path : write_files(out_dir, files)) out << "wrote " << path.string() << '\n';
    return static_cast<int>(kExitOk);
  });
}

/// Parses a cohort against its schema and prints a machine-readable report
/// of {line, column, message} issues. Exit 2 when anything is wrong.
inline int cmd_validate(const std::optional<std::filesystem::path>& config_path,
                        const std::optional<std::filesystem::path>& cohort_path,
                        const std::optional<std::filesystem::path>& schema_path, std::ostream& out, std::ostream& err) {
  nlohmann::ordered_json report;
  report["schema_version"] = 1;
  report["kind"] = "fairaudit-validation";
  auto issues_json = [](const std::vector<ValidationIssue>& issues) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& i : issues) arr.push_back({{"line", i.line}, {"column", i.column}, {"message", i.message}});
    return arr;
  };
  const int code = detail::guarded(err, [&] {
    report["valid"] = false;
    report["issues"] = nlohmann::ordered_json::array();
    try {
      ParsedCohort parsed;
      if (config_path) {
        const auto rc = load_run_config(*config_path);
        parsed = parse_cohort_file(rc.cohort_path.string(), rc.schema);
        detail::check_config_against(rc, parsed.cohort);
      } else {
        if (!cohort_path || !schema_path) throw ConfigError("validate needs --config, or --cohort with --schema");
        parsed = parse_cohort_file(cohort_path->string(), schema_from_json(read_json_file(*schema_path)));
      }
      report["valid"] = true;
      report["records"] = parsed.cohort.size();
      report["rejected"] = issues_json(parsed.rejected);
    } catch (const ValidationError& e) {
      auto issues = e.issues();
      if (issues.empty()) issues.push_back({0, "", e.what()});
      report["issues"] = issues_json(issues);
      out << report.dump(2) << '\n';
      throw;
    }
    out << report.dump(2) << '\n';
    return static_cast<int>(kExitOk);
  });
  return code;
}

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"fairaudit: subgroup performance audits for binary risk scores"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolkitVersion));

  std::string audit_config;
  ScalarOverrides audit_over;
  std::string compare_list;
  auto* audit = app.add_subcommand("audit", "Run a bootstrap and matched audit from a config file");
  audit->add_option("--config,-c", audit_config, "Run config (JSON)")->required();
  audit->add_option("--compare", compare_list, "Two score columns to compare, as a,b");
  detail::add_overrides(audit, audit_over);

  std::string compare_config;
  ScalarOverrides compare_over;
  std::vector<std::string> compare_models_arg;
  auto* compare = app.add_subcommand("compare", "Audit two score columns side by side");
  compare->add_option("--config,-c", compare_config, "Run config (JSON)")->required();
  compare->add_option("--models", compare_models_arg, "The two score columns")->required()->expected(2);
  detail::add_overrides(compare, compare_over);

  std::string match_config;
  ScalarOverrides match_over;
  auto* match = app.add_subcommand("match", "Propensity matching and covariate balance only");
  match->add_option("--config,-c", match_config, "Run config (JSON)")->required();
  detail::add_overrides(match, match_over);

  std::string synth_config, synth_out;
  std::optional<std::uint64_t> synth_seed;
  std::optional<std::size_t> synth_n;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort with a manifest");
  synth->add_option("--config,-c", synth_config, "Synthetic cohort config (JSON)")->required();
  synth->add_option("--out,-o", synth_out, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Override the seed");
  synth->add_option("--n", synth_n, "Override the number of records");

  std::string train_cohort, train_schema, train_out;
  std::vector<std::string> train_models;
  double train_fraction = 0.3, train_ridge = 1e-6;
  std::uint64_t train_seed = 1;
  bool train_keep_all = false;
  auto* train = app.add_subcommand("train", "Fit demo logistic models and append their scores");
  train->add_option("--cohort", train_cohort, "Cohort file")->required();
  train->add_option("--schema", train_schema, "Cohort schema (JSON)")->required();
  train->add_option("--model", train_models, "name=feature1,feature2 (repeatable)")->required();
  train->add_option("--test-fraction", train_fraction, "Share of each outcome class held out");
  train->add_option("--seed", train_seed, "Split seed");
  train->add_option("--ridge", train_ridge, "Ridge penalty");
  train->add_flag("--keep-all", train_keep_all, "Write every record instead of the test split");
  train->add_option("--out,-o", train_out, "Output directory")->required();

  std::string validate_config, validate_cohort, validate_schema;
  auto* validate = app.add_subcommand("validate", "Check a cohort against its schema");
  validate->add_option("--config,-c", validate_config, "Run config (JSON)");
  validate->add_option("--cohort", validate_cohort, "Cohort file");
  validate->add_option("--schema", validate_schema, "Cohort schema (JSON)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? static_cast<int>(kExitOk) : static_cast<int>(kExitValidation);
  }

  if (audit->parsed()) {
    std::vector<std::string> pair;
    if (!compare_list.empty()) pair = detail::split_list(compare_list);
    return cmd_audit(audit_config, audit_over, pair, out, err);
  }
  if (compare->parsed()) return cmd_audit(compare_config, compare_over, compare_models_arg, out, err);
  if (match->parsed()) return cmd_match(match_config, match_over, out, err);
  if (synth->parsed()) return cmd_synth(synth_config, synth_out, synth_seed, synth_n, out, err);
  if (train->parsed()) {
    return detail::guarded(err, [&] {
      std::vector<TrainSpec> specs;
      for (const auto& m : train_models) {
        const auto eq = m.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--model expects name=feature1,feature2 (got '" + m + "')");
        TrainSpec spec{m.substr(0, eq), {}};
        if (eq + 1 < m.size()) spec.features = detail::split_list(m.substr(eq + 1));
        specs.push_back(std::move(spec));
      }
      return cmd_train(train_cohort, train_schema, specs, train_fraction, train_seed, train_ridge, train_keep_all, train_out,
                       out, err);
    });
  }
  if (validate->parsed()) {
    auto opt = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional<std::filesystem::path>(s); };
    return cmd_validate(opt(validate_config), opt(validate_cohort), opt(validate_schema), out, err);
  }
  return static_cast<int>(kExitValidation);
}

}  // namespace fairaudit
