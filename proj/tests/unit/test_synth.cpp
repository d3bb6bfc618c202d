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

#include <algorithm>
#include <cmath>
#include <iterator>
#include <map>
#include <numeric>

#include <gtest/gtest.h>

#include "../support/oracles.hpp"
#include "fairaudit/matching.hpp"
#include "fairaudit/metrics.hpp"
#include "fairaudit/stats.hpp"
#include "fairaudit/synth.hpp"

using namespace fairaudit;

namespace {

std::vector<int> labels_at(const Cohort& c, std::span<const std::size_t> idx) {
  std::vector<int> out;
  for (auto i : idx) out.push_back(c.records[i].label);
  return out;
}

std::vector<double> scores_at(const Cohort& c, std::span<const std::size_t> idx, std::size_t column) {
  std::vector<double> out;
  for (auto i : idx) out.push_back(*c.records[i].scores[column]);
  return out;
}

double covariate(const Cohort& c, std::size_t row, const std::string& name) {
  return std::get<double>(c.records[row].covariates[*c.schema.covariate_index(name)]);
}

}  // namespace

TEST(Generate, DeterministicPerSeed) {
  const auto a = generate(oracle::base_config(300, 1));
  const auto b = generate(oracle::base_config(300, 1));
  const auto c = generate(oracle::base_config(300, 2));
  EXPECT_EQ(a.cohort.records, b.cohort.records);
  EXPECT_EQ(a.manifest, b.manifest);
  EXPECT_NE(a.cohort.records, c.cohort.records);
  EXPECT_EQ(a.cohort.records.front().id, "r1");
}

TEST(Generate, PrefixStable) {
  const auto small = generate(oracle::base_config(50, 4));
  const auto large = generate(oracle::base_config(200, 4));
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(small.cohort.records[i].label, large.cohort.records[i].label);
    EXPECT_EQ(small.cohort.records[i].scores, large.cohort.records[i].scores);
  }
}

TEST(Generate, ConfigErrors) {
  auto zero = oracle::base_config(0, 1);
  EXPECT_THROW(generate(zero), ConfigError);
  auto bad_p = oracle::base_config(10, 1);
  bad_p.protected_attributes[0].levels = {{"F", 0.5}, {"M", 0.4}};
  EXPECT_THROW(generate(bad_p), ConfigError);
  auto empty_level = oracle::base_config(10, 1);
  empty_level.protected_attributes[0].levels = {{"F", 1.0}, {"M", 0.0}};
  empty_level.injections = {{"sex", "M", BiasInjection::Mechanism::kShift, 0.1}};
  EXPECT_THROW(generate(empty_level), ConfigError);
}

TEST(Generate, ScoresInRangeAndLevelsPresent) {
  const auto g = generate(oracle::base_config(2000, 6));
  for (const auto& r : g.cohort.records) {
    ASSERT_TRUE(r.scores[0].has_value());
    EXPECT_GE(*r.scores[0], 0.0);
    EXPECT_LE(*r.scores[0], 1.0);
  }
  EXPECT_EQ(g.cohort.attribute_levels[1].size(), 3u);
  EXPECT_EQ(g.cohort.attribute_levels[2].size(), 3u);
}

TEST(ConfigJson, RoundTrip) {
  auto c = oracle::base_config(123, 77);
  c.injections = {{"race", "Black", BiasInjection::Mechanism::kNoise, 0.3}};
  c.outcome.protected_effects = {{"sex", "F", 0.2, 0.0}};
  const auto j = synth_config_to_json(c);
  const auto back = synth_config_from_json(nlohmann::ordered_json::parse(j.dump()));
  EXPECT_EQ(synth_config_to_json(back), j);
  EXPECT_EQ(generate(back).cohort.records, generate(c).cohort.records);
}

TEST(Split, StratifiedAndDisjoint) {
  const auto g = generate(oracle::base_config(1000, 8));
  const auto [train, test] = split_train_test(g.cohort, 0.3, 5);
  std::size_t pos = 0;
  for (const auto& r : g.cohort.records) pos += r.label;
  const std::size_t expected = static_cast<std::size_t>(std::llround(0.3 * static_cast<double>(pos))) +
                               static_cast<std::size_t>(std::llround(0.3 * static_cast<double>(1000 - pos)));
  EXPECT_EQ(test.size(), expected);
  EXPECT_EQ(train.size() + test.size(), 1000u);
  std::vector<std::size_t> both;
  std::set_intersection(train.begin(), train.end(), test.begin(), test.end(), std::back_inserter(both));
  EXPECT_TRUE(both.empty());
  EXPECT_TRUE(std::is_sorted(test.begin(), test.end()));
  const auto again = split_train_test(g.cohort, 0.3, 5);
  EXPECT_EQ(again.second, test);
  EXPECT_NE(split_train_test(g.cohort, 0.3, 6).second, test);
  EXPECT_THROW(split_train_test(g.cohort, 1.0, 5), ValidationError);
}

TEST(DemoTrain, InformativeFeaturesRankBetter) {
  const auto g = generate(oracle::base_config(4000, 10));
  const auto [train, test] = split_train_test(g.cohort, 0.3, 1);
  auto c = demo_train(g.cohort, train, {"x1", "x2", "x3"}, "full");
  c = demo_train(c, train, {"x3"}, "weak");
  const auto y = labels_at(c, test);
  const double full = auroc(y, scores_at(c, test, *c.schema.score_index("full")));
  const double weak = auroc(y, scores_at(c, test, *c.schema.score_index("weak")));
  EXPECT_GT(full, 0.75);
  EXPECT_GT(full, weak + 0.05);
  EXPECT_EQ(c.schema.score_columns.back().column, "score_weak");
  EXPECT_THROW(demo_train(c, train, {"x1"}, "full"), ValidationError);
}

TEST(DemoTrain, TrainedLogisticScoreModel) {
  auto cfg = oracle::base_config(1500, 12);
  cfg.score.kind = ScoreModel::Kind::kTrainedLogistic;
  cfg.score.name = "lr";
  cfg.score.features = {"x1", "x2"};
  const auto g = generate(cfg);
  ASSERT_TRUE(g.cohort.schema.score_index("lr").has_value());
  EXPECT_EQ(generate(cfg).cohort.records, g.cohort.records);
}

TEST(Manifest, InjectedNoiseAndShiftAreRecoverable) {
  auto cfg = oracle::base_config(30000, 14);
  cfg.injections = {{"race", "Black", BiasInjection::Mechanism::kNoise, 0.1},
                    {"race", "Hispanic", BiasInjection::Mechanism::kShift, 0.08}};
  const auto g = generate(cfg);
  const auto& c = g.cohort;
  const auto race = *c.schema.protected_index("race");
  std::map<std::string, std::vector<double>> resid;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double lp = cfg.outcome.intercept + covariate(c, i, "x1") * 1.0 + covariate(c, i, "x2") * 0.8 -
                      covariate(c, i, "x3") * 0.6;
    const double p = sigmoid(lp);
    if (p < 0.35 || p > 0.65) continue;
    resid[*c.records[i].protected_levels[race]].push_back(*c.records[i].scores[0] - p);
  }
  const auto white = mean_sd(resid["White"]);
  const auto black = mean_sd(resid["Black"]);
  const auto hisp = mean_sd(resid["Hispanic"]);
  EXPECT_NEAR(white.sd, 0.05, 0.005);
  EXPECT_NEAR(std::sqrt(black.sd * black.sd - white.sd * white.sd), 0.1, 0.01);
  EXPECT_NEAR(hisp.mean - white.mean, 0.08, 0.01);

  for (const auto& sg : g.manifest.at("subgroups")) {
    if (sg.at("level") == "Black") EXPECT_EQ(sg.at("injected_noise_sd").get<double>(), 0.1);
    if (sg.at("level") == "Hispanic") EXPECT_EQ(sg.at("injected_shift").get<double>(), 0.08);
    if (sg.at("attribute") == "race") {
      const double share = sg.at("count").get<double>() / 30000.0;
      EXPECT_NEAR(share, sg.at("probability").get<double>(), 0.015);
    }
  }
}

TEST(Manifest, LabelFlipsAreCounted) {
  auto cfg = oracle::base_config(20000, 15);
  cfg.injections = {{"sex", "F", BiasInjection::Mechanism::kLabelFlip, 0.2}};
  const auto g = generate(cfg);
  for (const auto& sg : g.manifest.at("subgroups")) {
    if (sg.at("attribute") != "sex") continue;
    const double rate = sg.at("labels_flipped").get<double>() / sg.at("count").get<double>();
    if (sg.at("level") == "F") EXPECT_NEAR(rate, 0.2, 0.02);
    else EXPECT_EQ(sg.at("labels_flipped").get<std::size_t>(), 0u);
  }
}

TEST(Confounding, ShiftedCovariateIsImbalanced) {
  const auto g = generate(oracle::confounded_config(3000, 16, 0.8));
  const auto grp = *g.cohort.schema.protected_index("group");
  std::vector<double> values;
  std::vector<std::size_t> a, b;
  for (std::size_t i = 0; i < g.cohort.size(); ++i) {
    values.push_back(covariate(g.cohort, i, "confounder"));
    (*g.cohort.records[i].protected_levels[grp] == "A" ? a : b).push_back(i);
  }
  EXPECT_GT(*smd(values, a, b), 0.2);
  EXPECT_NEAR(*smd(values, a, b), 0.8, 0.12);
}
