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
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fairaudit/cohort.hpp"
#include "fairaudit/error.hpp"
#include "fairaudit/glm.hpp"
#include "fairaudit/rng.hpp"

namespace fairaudit {

// Shift applied by a protected attribute to a covariate mean (gaussian), to
// a covariate log-odds (bernoulli) or to the outcome log-odds. Categorical
// attributes shift by `shift` when the record is at `level`; continuous ones
// add `slope` times the value rescaled to [-1, 1] over [lo, hi].
struct ProtectedEffect {
  std::string attribute;
  std::string level;
  double shift = 0.0;
  double slope = 0.0;
};

struct ProtectedSpec {
  std::string name;
  ProtectedKind kind = ProtectedKind::kCategorical;
  std::vector<std::pair<std::string, double>> levels;  // categorical: label, probability
  double lo = 0.0, hi = 1.0;                           // continuous: uniform range
  bool integer = false;
  std::vector<double> edges;  // optional explicit bins for the schema
};

struct CovariateSpec {
  enum class Generator { kGaussian, kBernoulli };
  std::string name;
  Generator generator = Generator::kGaussian;
  double mean = 0.0;
  double sd = 1.0;
  double p = 0.5;
  std::vector<ProtectedEffect> depends;
};

struct OutcomeModel {
  double intercept = 0.0;
  std::vector<std::pair<std::string, double>> coefficients;
  std::vector<ProtectedEffect> protected_effects;
};

struct ScoreModel {
  enum class Kind { kOracleNoise, kTrainedLogistic };
  Kind kind = Kind::kOracleNoise;
  std::string name = "oracle";
  double sigma = 0.05;                // oracle_noise: Gaussian noise on the probability scale
  std::vector<std::string> features;  // trained_logistic
  double ridge = 1e-6;
  double test_fraction = 0.3;
};

struct BiasInjection {
  enum class Mechanism { kNoise, kShift, kLabelFlip };
  std::string attribute;
  std::string level;
  Mechanism mechanism = Mechanism::kNoise;
  double value = 0.0;  // sigma, delta or flip rate
};

struct SynthConfig {
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  std::vector<ProtectedSpec> protected_attributes;
  std::vector<CovariateSpec> covariates;
  OutcomeModel outcome;
  ScoreModel score;
  std::vector<BiasInjection> injections;

  void validate() const;
};

struct GeneratedCohort {
  Cohort cohort;
  nlohmann::ordered_json manifest;
};

namespace detail {

inline const ProtectedSpec* find_protected(const SynthConfig& c, const std::string& name) {
  for (const auto& p : c.protected_attributes)
    if (p.name == name) return &p;
  return nullptr;
}

inline double level_probability(const ProtectedSpec& p, const std::string& level) {
  for (const auto& [label, prob] : p.levels)
    if (label == level) return prob;
  return -1.0;
}

inline void check_effect(const SynthConfig& c, const ProtectedEffect& e, const std::string& where) {
  const auto* p = find_protected(c, e.attribute);
  if (!p) throw ConfigError(where + ": unknown protected attribute '" + e.attribute + "'");
  if (p->kind == ProtectedKind::kCategorical && level_probability(*p, e.level) < 0.0)
    throw ConfigError(where + ": attribute '" + e.attribute + "' has no level '" + e.level + "'");
}

}  // namespace detail

inline void SynthConfig::validate() const {
  if (n == 0) throw ConfigError("synthetic cohort size n must be positive");
  if (protected_attributes.empty()) throw ConfigError("at least one protected attribute is required");
  for (const auto& p : protected_attributes) {
    if (p.kind == ProtectedKind::kCategorical) {
      if (p.levels.size() < 2) throw ConfigError("attribute '" + p.name + "' needs at least two levels");
      double total = 0.0;
      for (const auto& [label, prob] : p.levels) {
        if (!(prob >= 0.0 && prob <= 1.0)) throw ConfigError("attribute '" + p.name + "': probability outside [0,1]");
        total += prob;
      }
      if (std::fabs(total - 1.0) > 1e-9) throw ConfigError("attribute '" + p.name + "': level probabilities must sum to 1");
    } else if (!(p.lo < p.hi)) {
      throw ConfigError("attribute '" + p.name + "': continuous range needs lo < hi");
    }
  }
  for (const auto& c : covariates) {
    if (c.generator == CovariateSpec::Generator::kGaussian && !(c.sd >= 0.0))
      throw ConfigError("covariate '" + c.name + "': sd must be non-negative");
    if (c.generator == CovariateSpec::Generator::kBernoulli && !(c.p >= 0.0 && c.p <= 1.0))
      throw ConfigError("covariate '" + c.name + "': p must lie in [0,1]");
    for (const auto& e : c.depends) detail::check_effect(*this, e, "covariate '" + c.name + "'");
  }
  for (const auto& [name, coef] : outcome.coefficients) {
    if (std::none_of(covariates.begin(), covariates.end(), [&](const auto& c) { return c.name == name; }))
      throw ConfigError("outcome model refers to unknown covariate '" + name + "'");
  }
  for (const auto& e : outcome.protected_effects) detail::check_effect(*this, e, "outcome model");
  if (!(score.sigma >= 0.0)) throw ConfigError("score noise sigma must be non-negative");
  if (score.kind == ScoreModel::Kind::kTrainedLogistic && !(score.test_fraction > 0.0 && score.test_fraction < 1.0))
    throw ConfigError("test_fraction must lie strictly between 0 and 1");
  for (const auto& inj : injections) {
    const auto* p = detail::find_protected(*this, inj.attribute);
    if (!p || p->kind != ProtectedKind::kCategorical)
      throw ConfigError("bias injection needs a categorical protected attribute (got '" + inj.attribute + "')");
    const double prob = detail::level_probability(*p, inj.level);
    if (prob < 0.0) throw ConfigError("bias injection: attribute '" + inj.attribute + "' has no level '" + inj.level + "'");
    if (prob == 0.0)
      throw ConfigError("bias injection targets level '" + inj.level + "' which has probability 0");
    if (inj.mechanism == BiasInjection::Mechanism::kNoise && !(inj.value >= 0.0))
      throw ConfigError("injected noise sigma must be non-negative");
    if (inj.mechanism == BiasInjection::Mechanism::kLabelFlip && !(inj.value >= 0.0 && inj.value <= 1.0))
      throw ConfigError("label flip rate must lie in [0,1]");
  }
}

/// Outcome-stratified split: each class is shuffled with its own seeded
/// stream and the first round(test_fraction * class size) records go to
/// the test set. Both index lists come back sorted.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_test(const Cohort& cohort,
                                                                                      double test_fraction,
                                                                                      std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ValidationError("test_fraction must lie strictly between 0 and 1");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < cohort.size(); ++i) by_class[cohort.records[i].label].push_back(i);
  std::vector<std::size_t> train, test;
  for (int c = 0; c < 2; ++c) {
    auto& idx = by_class[c];
    if (idx.size() < 2) throw ValidationError("outcome class " + std::to_string(c) + " has fewer than 2 records");
    Rng rng = Rng::stream(seed, {0x73706c6974ULL, static_cast<std::uint64_t>(c)});
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(idx.size())));
    test.insert(test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    train.insert(train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

/// Fits a logistic model on the training rows and appends its predicted
/// probabilities for every record as score column `score_<model_name>`.
inline Cohort demo_train(const Cohort& cohort, std::span<const std::size_t> train, const std::vector<std::string>& features,
                         const std::string& model_name, double ridge = 1e-6, LogisticModel* fitted = nullptr) {
  if (cohort.schema.score_index(model_name)) throw ValidationError("model '" + model_name + "' already exists");
  std::vector<int> y;
  y.reserve(train.size());
  for (auto i : train) y.push_back(cohort.records[i].label);
  const auto design = encode_design(cohort, train, features);
  FitOptions opts;
  opts.ridge = ridge;
  const auto model = fit_logistic(design, y, opts);
  std::vector<std::size_t> all(cohort.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto probs = predict_proba(model, encode_with(cohort, all, model.columns));
  if (fitted) *fitted = model;

  Cohort out = cohort;
  out.schema.score_columns.push_back({model_name, "score_" + model_name});
  for (std::size_t i = 0; i < out.size(); ++i) out.records[i].scores.emplace_back(probs[i]);
  out.schema.validate();
  return out;
}

/// Copy of the records at `indices` (in that order); continuous protected
/// attributes are re-binned on the subset.
inline Cohort subset_cohort(const Cohort& cohort, std::span<const std::size_t> indices) {
  std::vector<CohortRecord> records;
  records.reserve(indices.size());
  for (auto i : indices) records.push_back(cohort.records[i]);
  return make_cohort(cohort.schema, std::move(records));
}

namespace detail {

inline double effect_of(const ProtectedEffect& e, const SynthConfig& config, const std::vector<std::string>& levels,
                        const std::vector<double>& raw) {
  for (std::size_t a = 0; a < config.protected_attributes.size(); ++a) {
    const auto& p = config.protected_attributes[a];
    if (p.name != e.attribute) continue;
    if (p.kind == ProtectedKind::kCategorical) return levels[a] == e.level ? e.shift : 0.0;
    const double scaled = 2.0 * (raw[a] - p.lo) / (p.hi - p.lo) - 1.0;
    return e.slope * scaled;
  }
  return 0.0;
}

inline const char* mechanism_name(BiasInjection::Mechanism m) {
  switch (m) {
    case BiasInjection::Mechanism::kNoise: return "noise";
    case BiasInjection::Mechanism::kShift: return "shift";
    case BiasInjection::Mechanism::kLabelFlip: return "label_flip";
  }
  return "?";
}

}  // namespace detail

inline nlohmann::ordered_json synth_config_to_json(const SynthConfig& c);

/// Draws a synthetic cohort.
///
/// Record i uses its own stream keyed on (seed, i) and draws, in order: the
/// protected attributes, the covariates (shifted by their protected
/// dependences), the outcome from the logistic outcome model, and the score
/// noise. The oracle score is sigmoid(linear predictor) plus Gaussian noise
/// of sd `score.sigma`, plus any injected noise or shift for the record's
/// subgroup, clamped to [0,1]. Label flips are applied last, after the
/// score, so they model mislabelled outcomes.
inline GeneratedCohort generate(const SynthConfig& config) {
  config.validate();
  CohortSchema schema;
  schema.id_column = "id";
  schema.label_column = "label";
  const std::string oracle_name =
      config.score.kind == ScoreModel::Kind::kOracleNoise ? config.score.name : std::string("oracle");
  schema.score_columns.push_back({oracle_name, "score_" + oracle_name});
  for (const auto& p : config.protected_attributes) schema.protected_columns.push_back({p.name, p.kind, p.edges});
  for (const auto& c : config.covariates) {
    schema.covariate_columns.push_back(
        {c.name, c.generator == CovariateSpec::Generator::kBernoulli ? CovariateKind::kBinary : CovariateKind::kNumeric});
  }

  const std::size_t n_attr = config.protected_attributes.size();
  std::vector<CohortRecord> records;
  records.reserve(config.n);
  std::vector<std::size_t> flips(config.injections.size(), 0);
  for (std::size_t i = 0; i < config.n; ++i) {
    Rng rng = Rng::stream(config.seed, {static_cast<std::uint64_t>(i)});
    CohortRecord r;
    r.id = "r" + std::to_string(i + 1);
    std::vector<std::string> levels(n_attr);
    std::vector<double> raw(n_attr, 0.0);
    for (std::size_t a = 0; a < n_attr; ++a) {
      const auto& p = config.protected_attributes[a];
      const double u = rng.uniform();
      if (p.kind == ProtectedKind::kCategorical) {
        double acc = 0.0;
        levels[a] = p.levels.back().first;
        for (const auto& [label, prob] : p.levels) {
          acc += prob;
          if (u < acc) {
            levels[a] = label;
            break;
          }
        }
        r.protected_levels.emplace_back(levels[a]);
        r.protected_raw.emplace_back(std::nullopt);
      } else {
        double v = p.lo + u * (p.hi - p.lo);
        if (p.integer) v = std::min(std::floor(v), p.hi);
        raw[a] = v;
        r.protected_levels.emplace_back(std::nullopt);
        r.protected_raw.emplace_back(v);
      }
    }

    std::vector<double> x(config.covariates.size());
    for (std::size_t c = 0; c < config.covariates.size(); ++c) {
      const auto& spec = config.covariates[c];
      double shift = 0.0;
      for (const auto& e : spec.depends) shift += detail::effect_of(e, config, levels, raw);
      if (spec.generator == CovariateSpec::Generator::kGaussian) {
        x[c] = spec.mean + shift + spec.sd * rng.normal();
      } else {
        double p = spec.p;
        if (shift != 0.0 && p > 0.0 && p < 1.0) p = sigmoid(logit(p) + shift);
        x[c] = rng.bernoulli(p) ? 1.0 : 0.0;
      }
      r.covariates.emplace_back(x[c]);
    }

    double lp = config.outcome.intercept;
    for (const auto& [name, coef] : config.outcome.coefficients) {
      for (std::size_t c = 0; c < config.covariates.size(); ++c)
        if (config.covariates[c].name == name) lp += coef * x[c];
    }
    for (const auto& e : config.outcome.protected_effects) lp += detail::effect_of(e, config, levels, raw);
    const double prob = sigmoid(lp);
    r.label = rng.bernoulli(prob) ? 1 : 0;

    double score = prob + config.score.sigma * rng.normal();
    for (const auto& inj : config.injections) {
      const double z = rng.normal();  // drawn for every injection to keep streams aligned
      if (!detail::effect_of({inj.attribute, inj.level, 1.0, 0.0}, config, levels, raw)) continue;
      if (inj.mechanism == BiasInjection::Mechanism::kNoise) score += inj.value * z;
      if (inj.mechanism == BiasInjection::Mechanism::kShift) score += inj.value;
    }
    r.scores.emplace_back(std::clamp(score, 0.0, 1.0));
    for (std::size_t k = 0; k < config.injections.size(); ++k) {
      const auto& inj = config.injections[k];
      const double u = rng.uniform();
      if (inj.mechanism != BiasInjection::Mechanism::kLabelFlip) continue;
      if (!detail::effect_of({inj.attribute, inj.level, 1.0, 0.0}, config, levels, raw)) continue;
      if (u < inj.value) {
        r.label = 1 - r.label;
        ++flips[k];
      }
    }
    records.push_back(std::move(r));
  }

  GeneratedCohort out;
  out.cohort = make_cohort(schema, std::move(records));

  if (config.score.kind == ScoreModel::Kind::kTrainedLogistic) {
    const auto [train, test] = split_train_test(out.cohort, config.score.test_fraction, config.seed);
    out.cohort = demo_train(out.cohort, train, config.score.features, config.score.name, config.score.ridge);
  }

  auto& m = out.manifest;
  m["schema_version"] = 1;
  m["generator"] = "fairaudit-synth";
  m["seed"] = config.seed;
  m["n"] = config.n;
  m["config"] = synth_config_to_json(config);
  auto& groups = m["subgroups"] = nlohmann::ordered_json::array();
  for (std::size_t a = 0; a < n_attr; ++a) {
    const auto& p = config.protected_attributes[a];
    if (p.kind != ProtectedKind::kCategorical) continue;
    for (const auto& [label, prob] : p.levels) {
      std::size_t count = 0, positives = 0;
      for (const auto& r : out.cohort.records) {
        if (r.protected_levels[a] && *r.protected_levels[a] == label) {
          ++count;
          positives += r.label;
        }
      }
      nlohmann::ordered_json g;
      g["attribute"] = p.name;
      g["level"] = label;
      g["probability"] = prob;
      g["count"] = count;
      g["positives"] = positives;
      g["base_noise_sd"] = config.score.kind == ScoreModel::Kind::kOracleNoise ? config.score.sigma : 0.0;
      double noise = 0.0, shift = 0.0, flip = 0.0;
      std::size_t flipped = 0;
      for (std::size_t k = 0; k < config.injections.size(); ++k) {
        const auto& inj = config.injections[k];
        if (inj.attribute != p.name || inj.level != label) continue;
        if (inj.mechanism == BiasInjection::Mechanism::kNoise) noise = std::hypot(noise, inj.value);
        if (inj.mechanism == BiasInjection::Mechanism::kShift) shift += inj.value;
        if (inj.mechanism == BiasInjection::Mechanism::kLabelFlip) {
          flip = inj.value;
          flipped += flips[k];
        }
      }
      g["injected_noise_sd"] = noise;
      g["injected_shift"] = shift;
      g["label_flip_rate"] = flip;
      g["labels_flipped"] = flipped;
      groups.push_back(std::move(g));
    }
  }
  return out;
}

// --- JSON config ------------------------------------------------------------

namespace detail {

inline std::vector<ProtectedEffect> effects_from_json(const nlohmann::ordered_json& j) {
  std::vector<ProtectedEffect> out;
  for (const auto& e : j) {
    ProtectedEffect pe;
    pe.attribute = e.at("attribute").get<std::string>();
    pe.level = e.value("level", "");
    pe.shift = e.value("shift", 0.0);
    pe.slope = e.value("slope", 0.0);
    out.push_back(std::move(pe));
  }
  return out;
}

inline nlohmann::ordered_json effects_to_json(const std::vector<ProtectedEffect>& effects) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : effects) {
    nlohmann::ordered_json j;
    j["attribute"] = e.attribute;
    if (!e.level.empty()) j["level"] = e.level;
    if (e.shift != 0.0) j["shift"] = e.shift;
    if (e.slope != 0.0) j["slope"] = e.slope;
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace detail

/// Reads a synthetic-cohort configuration (see README for the grammar).
/// Throws ConfigError on missing or malformed fields.
inline SynthConfig synth_config_from_json(const nlohmann::ordered_json& j) {
  try {
    SynthConfig c;
    c.n = j.at("n").get<std::size_t>();
    c.seed = j.value("seed", std::uint64_t{1});
    for (const auto& p : j.at("protected")) {
      ProtectedSpec spec;
      spec.name = p.at("name").get<std::string>();
      const auto kind = p.value("kind", "categorical");
      if (kind == "categorical") {
        spec.kind = ProtectedKind::kCategorical;
        for (const auto& l : p.at("levels")) spec.levels.emplace_back(l.at("label").get<std::string>(), l.at("p").get<double>());
      } else if (kind == "continuous") {
        spec.kind = ProtectedKind::kContinuous;
        spec.lo = p.at("lo").get<double>();
        spec.hi = p.at("hi").get<double>();
        spec.integer = p.value("integer", false);
        spec.edges = p.value("edges", std::vector<double>{});
      } else {
        throw ConfigError("protected attribute '" + spec.name + "': unknown kind '" + kind + "'");
      }
      c.protected_attributes.push_back(std::move(spec));
    }
    for (const auto& cv : j.value("covariates", nlohmann::ordered_json::array())) {
      CovariateSpec spec;
      spec.name = cv.at("name").get<std::string>();
      const auto gen = cv.value("generator", "gaussian");
      if (gen == "gaussian") {
        spec.generator = CovariateSpec::Generator::kGaussian;
        spec.mean = cv.value("mean", 0.0);
        spec.sd = cv.value("sd", 1.0);
      } else if (gen == "bernoulli") {
        spec.generator = CovariateSpec::Generator::kBernoulli;
        spec.p = cv.value("p", 0.5);
      } else {
        throw ConfigError("covariate '" + spec.name + "': unknown generator '" + gen + "'");
      }
      if (cv.contains("depends")) spec.depends = detail::effects_from_json(cv.at("depends"));
      c.covariates.push_back(std::move(spec));
    }
    if (j.contains("outcome")) {
      const auto& o = j.at("outcome");
      c.outcome.intercept = o.value("intercept", 0.0);
      const auto coefficients = o.value("coefficients", nlohmann::ordered_json::object());
      for (const auto& [name, coef] : coefficients.items())
        c.outcome.coefficients.emplace_back(name, coef.get<double>());
      if (o.contains("protected_effects")) c.outcome.protected_effects = detail::effects_from_json(o.at("protected_effects"));
    }
    if (j.contains("score")) {
      const auto& s = j.at("score");
      const auto type = s.value("type", "oracle_noise");
      if (type == "oracle_noise") {
        c.score.kind = ScoreModel::Kind::kOracleNoise;
      } else if (type == "trained_logistic") {
        c.score.kind = ScoreModel::Kind::kTrainedLogistic;
      } else {
        throw ConfigError("unknown score model type '" + type + "'");
      }
      c.score.name = s.value("name", c.score.name);
      c.score.sigma = s.value("sigma", c.score.sigma);
      c.score.features = s.value("features", std::vector<std::string>{});
      c.score.ridge = s.value("ridge", c.score.ridge);
      c.score.test_fraction = s.value("test_fraction", c.score.test_fraction);
    }
    for (const auto& inj : j.value("injections", nlohmann::ordered_json::array())) {
      BiasInjection b;
      b.attribute = inj.at("attribute").get<std::string>();
      b.level = inj.at("level").get<std::string>();
      const auto mech = inj.at("mechanism").get<std::string>();
      if (mech == "noise") b.mechanism = BiasInjection::Mechanism::kNoise;
      else if (mech == "shift") b.mechanism = BiasInjection::Mechanism::kShift;
      else if (mech == "label_flip") b.mechanism = BiasInjection::Mechanism::kLabelFlip;
      else throw ConfigError("unknown bias mechanism '" + mech + "'");
      b.value = inj.at("value").get<double>();
      c.injections.push_back(std::move(b));
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synthetic config: ") + e.what());
  }
}

inline nlohmann::ordered_json synth_config_to_json(const SynthConfig& c) {
  nlohmann::ordered_json j;
  j["n"] = c.n;
  j["seed"] = c.seed;
  auto& prot = j["protected"] = nlohmann::ordered_json::array();
  for (const auto& p : c.protected_attributes) {
    nlohmann::ordered_json pj;
    pj["name"] = p.name;
    if (p.kind == ProtectedKind::kCategorical) {
      pj["kind"] = "categorical";
      auto& lv = pj["levels"] = nlohmann::ordered_json::array();
      for (const auto& [label, prob] : p.levels) lv.push_back({{"label", label}, {"p", prob}});
    } else {
      pj["kind"] = "continuous";
      pj["lo"] = p.lo;
      pj["hi"] = p.hi;
      pj["integer"] = p.integer;
      if (!p.edges.empty()) pj["edges"] = p.edges;
    }
    prot.push_back(std::move(pj));
  }
  auto& covs = j["covariates"] = nlohmann::ordered_json::array();
  for (const auto& cv : c.covariates) {
    nlohmann::ordered_json cj;
    cj["name"] = cv.name;
    if (cv.generator == CovariateSpec::Generator::kGaussian) {
      cj["generator"] = "gaussian";
      cj["mean"] = cv.mean;
      cj["sd"] = cv.sd;
    } else {
      cj["generator"] = "bernoulli";
      cj["p"] = cv.p;
    }
    if (!cv.depends.empty()) cj["depends"] = detail::effects_to_json(cv.depends);
    covs.push_back(std::move(cj));
  }
  auto& o = j["outcome"];
  o["intercept"] = c.outcome.intercept;
  o["coefficients"] = nlohmann::ordered_json::object();
  for (const auto& [name, coef] : c.outcome.coefficients) o["coefficients"][name] = coef;
  if (!c.outcome.protected_effects.empty()) o["protected_effects"] = detail::effects_to_json(c.outcome.protected_effects);
  auto& s = j["score"];
  s["type"] = c.score.kind == ScoreModel::Kind::kOracleNoise ? "oracle_noise" : "trained_logistic";
  s["name"] = c.score.name;
  if (c.score.kind == ScoreModel::Kind::kOracleNoise) {
    s["sigma"] = c.score.sigma;
  } else {
    s["features"] = c.score.features;
    s["ridge"] = c.score.ridge;
    s["test_fraction"] = c.score.test_fraction;
  }
  auto& inj = j["injections"] = nlohmann::ordered_json::array();
  for (const auto& b : c.injections)
    inj.push_back({{"attribute", b.attribute}, {"level", b.level}, {"mechanism", detail::mechanism_name(b.mechanism)}, {"value", b.value}});
  return j;
}

}  // namespace fairaudit
