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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "fairaudit/cohort.hpp"
#include "fairaudit/error.hpp"

namespace fairaudit {

struct FeatureDescriptor {
  enum class Kind { kIntercept, kNumeric, kIndicator, kMissingIndicator };

  Kind kind = Kind::kIntercept;
  std::string name;   // source covariate or protected attribute
  std::string level;  // kIndicator only
  double mean = 0.0;  // kNumeric: centre (also the imputation value)
  double sd = 1.0;    // kNumeric: population standard deviation

  bool operator==(const FeatureDescriptor&) const = default;
};

inline std::string feature_label(const FeatureDescriptor& f) {
  switch (f.kind) {
    case FeatureDescriptor::Kind::kIntercept: return "(intercept)";
    case FeatureDescriptor::Kind::kNumeric: return f.name;
    case FeatureDescriptor::Kind::kIndicator: return f.name + "=" + f.level;
    case FeatureDescriptor::Kind::kMissingIndicator: return f.name + ":missing";
  }
  return f.name;
}

struct DesignMatrix {
  std::vector<FeatureDescriptor> columns;
  Eigen::MatrixXd values;
  std::vector<std::size_t> row_index;  // cohort record position of each row
  std::vector<std::string> notes;      // dropped columns and similar

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return columns.size(); }
};

namespace detail {

// Uniform view over a covariate or protected column of the cohort.
struct SourceColumn {
  std::string name;
  bool categorical = false;
  std::size_t index = 0;
  bool is_protected = false;
};

inline SourceColumn resolve_source(const Cohort& cohort, const std::string& name) {
  if (auto c = cohort.schema.covariate_index(name)) {
    return {name, cohort.schema.covariate_columns[*c].kind == CovariateKind::kCategorical, *c, false};
  }
  if (auto p = cohort.schema.protected_index(name)) {
    return {name, cohort.schema.protected_columns[*p].kind == ProtectedKind::kCategorical, *p, true};
  }
  throw ValidationError("unknown covariate '" + name + "'");
}

inline std::optional<double> numeric_at(const Cohort& cohort, const SourceColumn& src, std::size_t row) {
  const auto& r = cohort.records[row];
  if (src.is_protected) return r.protected_raw[src.index];
  if (const auto* v = std::get_if<double>(&r.covariates[src.index])) return *v;
  return std::nullopt;
}

// Categorical value; MISSING becomes the "NA" level.
inline std::string level_at(const Cohort& cohort, const SourceColumn& src, std::size_t row) {
  const auto& r = cohort.records[row];
  if (src.is_protected) {
    const auto& lvl = r.protected_levels[src.index];
    return lvl ? *lvl : std::string(kMissingLevel);
  }
  if (const auto* s = std::get_if<std::string>(&r.covariates[src.index])) return *s;
  return std::string(kMissingLevel);
}

}  // namespace detail

/// Builds an intercept-first design matrix over `indices`.
///
/// Numeric covariates are mean-imputed and standardized with the population
/// standard deviation; a missingness indicator column follows any numeric
/// covariate with missing values on the subset. Categorical covariates use
/// reference coding with the first-appearing level as reference, and MISSING
/// is a level of its own. Zero-variance columns are dropped with a note.
inline DesignMatrix encode_design(const Cohort& cohort, std::span<const std::size_t> indices,
                                  const std::vector<std::string>& covariates) {
  DesignMatrix dm;
  dm.row_index.assign(indices.begin(), indices.end());
  const std::size_t n = indices.size();
  dm.columns.push_back({FeatureDescriptor::Kind::kIntercept, "", "", 0.0, 1.0});
  std::vector<std::vector<double>> data{std::vector<double>(n, 1.0)};

  for (const auto& name : covariates) {
    const auto src = detail::resolve_source(cohort, name);
    if (src.categorical) {
      std::vector<std::string> values(n);
      std::vector<std::string> levels;
      std::unordered_set<std::string> seen;
      bool any_present = false;
      for (std::size_t i = 0; i < n; ++i) {
        values[i] = detail::level_at(cohort, src, indices[i]);
        if (values[i] != kMissingLevel) any_present = true;
        if (seen.insert(values[i]).second) levels.push_back(values[i]);
      }
      if (!any_present && n > 0) throw ValidationError("covariate '" + name + "' is entirely missing on the subset");
      if (levels.size() < 2) {
        dm.notes.push_back("dropped '" + name + "': single level on subset");
        continue;
      }
      for (std::size_t l = 1; l < levels.size(); ++l) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = values[i] == levels[l] ? 1.0 : 0.0;
        dm.columns.push_back({FeatureDescriptor::Kind::kIndicator, name, levels[l], 0.0, 1.0});
        data.push_back(std::move(col));
      }
      continue;
    }

    std::vector<std::optional<double>> raw(n);
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t i = 0; i < n; ++i) {
      raw[i] = detail::numeric_at(cohort, src, indices[i]);
      if (raw[i]) {
        sum += *raw[i];
        ++present;
      }
    }
    if (present == 0) throw ValidationError("covariate '" + name + "' is entirely missing on the subset");
    const double mean = sum / static_cast<double>(present);
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = raw[i] ? *raw[i] : mean;
    double ss = 0.0;
    for (double v : col) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    if (sd > 0.0) {
      for (double& v : col) v = (v - mean) / sd;
      dm.columns.push_back({FeatureDescriptor::Kind::kNumeric, name, "", mean, sd});
      data.push_back(std::move(col));
    } else {
      dm.notes.push_back("dropped '" + name + "': zero variance on subset");
    }
    if (present < n) {
      std::vector<double> miss(n);
      for (std::size_t i = 0; i < n; ++i) miss[i] = raw[i] ? 0.0 : 1.0;
      dm.columns.push_back({FeatureDescriptor::Kind::kMissingIndicator, name, "", 0.0, 1.0});
      data.push_back(std::move(miss));
    }
  }

  dm.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(data.size()));
  for (std::size_t c = 0; c < data.size(); ++c)
    for (std::size_t i = 0; i < n; ++i) dm.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = data[c][i];
  return dm;
}

/// Re-encodes rows with previously fitted column descriptors, so a model
/// trained on one subset can score another. Unseen categorical levels map
/// to the reference level.
inline DesignMatrix encode_with(const Cohort& cohort, std::span<const std::size_t> indices,
                                const std::vector<FeatureDescriptor>& columns) {
  DesignMatrix dm;
  dm.columns = columns;
  dm.row_index.assign(indices.begin(), indices.end());
  dm.values.resize(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const auto& f = columns[c];
    const auto ci = static_cast<Eigen::Index>(c);
    if (f.kind == FeatureDescriptor::Kind::kIntercept) {
      dm.values.col(ci).setOnes();
      continue;
    }
    const auto src = detail::resolve_source(cohort, f.name);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const auto ri = static_cast<Eigen::Index>(i);
      switch (f.kind) {
        case FeatureDescriptor::Kind::kNumeric: {
          const auto v = detail::numeric_at(cohort, src, indices[i]);
          dm.values(ri, ci) = ((v ? *v : f.mean) - f.mean) / f.sd;
          break;
        }
        case FeatureDescriptor::Kind::kIndicator:
          dm.values(ri, ci) = detail::level_at(cohort, src, indices[i]) == f.level ? 1.0 : 0.0;
          break;
        case FeatureDescriptor::Kind::kMissingIndicator:
          dm.values(ri, ci) = detail::numeric_at(cohort, src, indices[i]) ? 0.0 : 1.0;
          break;
        case FeatureDescriptor::Kind::kIntercept: break;
      }
    }
  }
  return dm;
}

struct LogisticModel {
  std::vector<FeatureDescriptor> columns;
  Eigen::VectorXd coefficients;
  bool converged = false;
  std::size_t iterations = 0;
  double final_gradient_norm = 0.0;
  double ridge = 0.0;
};

struct FitOptions {
  double ridge = 1e-6;
  std::size_t max_iter = 100;
  double tol = 1e-8;
};

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

/// Log-likelihood of a logistic model; exposed for gradient checks.
inline double log_likelihood(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = x * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += (y[static_cast<std::size_t>(i)] == 1 ? eta(i) : 0.0) - softplus(eta(i));
  return ll;
}

/// Gradient of the ridge-penalized log-likelihood; the intercept (column 0)
/// is not penalized.
inline Eigen::VectorXd penalized_gradient(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::VectorXd& beta,
                                          double ridge) {
  const Eigen::VectorXd eta = x * beta;
  Eigen::VectorXd resid(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) resid(i) = (y[static_cast<std::size_t>(i)] == 1 ? 1.0 : 0.0) - sigmoid(eta(i));
  Eigen::VectorXd g = x.transpose() * resid;
  for (Eigen::Index j = 1; j < beta.size(); ++j) g(j) -= ridge * beta(j);
  return g;
}

/// Newton-Raphson (IRLS) fit of a ridge-penalized logistic regression from a
/// zero start.
///
/// The fit is declared converged when the gradient max-norm is within `tol`
/// and the Newton step it implies is small too. Under complete separation
/// the gradient vanishes while the step stays near one, so such fits run to
/// `max_iter` and come back with `converged == false`.
///
/// Throws StatisticalError when the Hessian is numerically singular at the
/// zero start and `ridge == 0`.
inline LogisticModel fit_logistic(const DesignMatrix& design, std::span<const int> outcomes,
                                  const FitOptions& options = {}) {
  const auto& x = design.values;
  const auto n = x.rows();
  const auto p = x.cols();
  if (static_cast<std::size_t>(n) != outcomes.size()) throw ValidationError("design rows and outcomes differ in length");
  std::size_t positives = 0;
  for (int y : outcomes) positives += (y == 1);
  if (positives == 0 || positives == outcomes.size())
    throw StatisticalError("logistic fit needs both outcome classes");
  if (options.ridge < 0.0) throw ValidationError("ridge penalty must be non-negative");

  const double lambda = options.ridge;
  const double step_guard = std::sqrt(options.tol);
  auto objective = [&](const Eigen::VectorXd& b) {
    return log_likelihood(x, outcomes, b) - 0.5 * lambda * b.tail(p - 1).squaredNorm();
  };

  LogisticModel model;
  model.columns = design.columns;
  model.ridge = lambda;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double current = objective(beta);

  for (std::size_t iter = 0; iter <= options.max_iter; ++iter) {
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd resid(n), weight(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pi = sigmoid(eta(i));
      resid(i) = (outcomes[static_cast<std::size_t>(i)] == 1 ? 1.0 : 0.0) - pi;
      weight(i) = pi * (1.0 - pi);
    }
    Eigen::VectorXd grad = x.transpose() * resid;
    for (Eigen::Index j = 1; j < p; ++j) grad(j) -= lambda * beta(j);
    model.final_gradient_norm = grad.cwiseAbs().maxCoeff();
    if (iter == options.max_iter) break;

    Eigen::MatrixXd hessian = x.transpose() * weight.asDiagonal() * x;
    for (Eigen::Index j = 1; j < p; ++j) hessian(j, j) += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    const Eigen::VectorXd diag = ldlt.vectorD();
    const double dmax = diag.cwiseAbs().maxCoeff();
    const bool singular = ldlt.info() != Eigen::Success || diag.minCoeff() <= 1e-13 * dmax || !(dmax > 0.0);
    if (singular) {
      if (lambda == 0.0 && iter == 0) {
        throw StatisticalError(
            "logistic fit: Hessian is numerically singular (collinear or constant covariates); retry with ridge > 0");
      }
      break;
    }
    Eigen::VectorXd step = ldlt.solve(grad);
    const double step_norm = step.cwiseAbs().maxCoeff();
    if (model.final_gradient_norm <= options.tol && step_norm <= step_guard) {
      model.converged = true;
      break;
    }

    // Step halving keeps the objective from decreasing far from the optimum.
    Eigen::VectorXd candidate = beta + step;
    double value = objective(candidate);
    for (int halving = 0; halving < 30 && value < current - 1e-12 * std::fabs(current); ++halving) {
      step *= 0.5;
      candidate = beta + step;
      value = objective(candidate);
    }
    beta = candidate;
    current = value;
    model.iterations = iter + 1;
  }
  model.coefficients = beta;
  return model;
}

/// sigma(X beta) for a design built with the model's own column descriptors.
inline std::vector<double> predict_proba(const LogisticModel& model, const DesignMatrix& design) {
  if (design.columns != model.columns)
    throw ValidationError("design columns do not match the model; encode with the model's descriptors");
  const Eigen::VectorXd eta = design.values * model.coefficients;
  std::vector<double> out(static_cast<std::size_t>(eta.size()));
  for (Eigen::Index i = 0; i < eta.size(); ++i) out[static_cast<std::size_t>(i)] = sigmoid(eta(i));
  return out;
}

inline const char* feature_kind_name(FeatureDescriptor::Kind k) {
  switch (k) {
    case FeatureDescriptor::Kind::kIntercept: return "intercept";
    case FeatureDescriptor::Kind::kNumeric: return "numeric";
    case FeatureDescriptor::Kind::kIndicator: return "indicator";
    case FeatureDescriptor::Kind::kMissingIndicator: return "missing_indicator";
  }
  return "?";
}

// Structured text record of a fitted model.
inline nlohmann::ordered_json model_to_json(const LogisticModel& model) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["ridge"] = model.ridge;
  j["converged"] = model.converged;
  j["iterations"] = model.iterations;
  j["final_gradient_norm"] = model.final_gradient_norm;
  auto& cols = j["columns"] = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < model.columns.size(); ++c) {
    const auto& f = model.columns[c];
    nlohmann::ordered_json col;
    col["kind"] = feature_kind_name(f.kind);
    col["name"] = f.name;
    if (f.kind == FeatureDescriptor::Kind::kIndicator) col["level"] = f.level;
    if (f.kind == FeatureDescriptor::Kind::kNumeric) {
      col["mean"] = f.mean;
      col["sd"] = f.sd;
    }
    col["coefficient"] = model.coefficients(static_cast<Eigen::Index>(c));
    cols.push_back(std::move(col));
  }
  return j;
}

inline LogisticModel model_from_json(const nlohmann::ordered_json& j) {
  LogisticModel m;
  m.ridge = j.at("ridge").get<double>();
  m.converged = j.at("converged").get<bool>();
  m.iterations = j.at("iterations").get<std::size_t>();
  m.final_gradient_norm = j.at("final_gradient_norm").get<double>();
  const auto& cols = j.at("columns");
  m.coefficients.resize(static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const auto& col = cols[c];
    FeatureDescriptor f;
    const auto kind = col.at("kind").get<std::string>();
    if (kind == "intercept") f.kind = FeatureDescriptor::Kind::kIntercept;
    else if (kind == "numeric") f.kind = FeatureDescriptor::Kind::kNumeric;
    else if (kind == "indicator") f.kind = FeatureDescriptor::Kind::kIndicator;
    else if (kind == "missing_indicator") f.kind = FeatureDescriptor::Kind::kMissingIndicator;
    else throw ConfigError("unknown feature kind '" + kind + "'");
    f.name = col.at("name").get<std::string>();
    if (col.contains("level")) f.level = col.at("level").get<std::string>();
    if (col.contains("mean")) f.mean = col.at("mean").get<double>();
    if (col.contains("sd")) f.sd = col.at("sd").get<double>();
    m.columns.push_back(std::move(f));
    m.coefficients(static_cast<Eigen::Index>(c)) = col.at("coefficient").get<double>();
  }
  return m;
}

}  // namespace fairaudit
