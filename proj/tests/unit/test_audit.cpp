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
#include <random>

#include <gtest/gtest.h>

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"
#include "fairaudit/audit.hpp"
#include "fairaudit/synth.hpp"

using namespace fairaudit;

namespace {

CohortSchema group_schema() {
  CohortSchema s;
  s.score_columns = {{"m", "score"}};
  s.protected_columns = {{"grp", ProtectedKind::kCategorical, {}}};
  return s;
}

AuditConfig quick_config(std::size_t b = 30) {
  AuditConfig c;
  c.metrics = {Metric::kAuroc, Metric::kSens, Metric::kPpv};
  c.n_bootstrap = b;
  c.seed = 9;
  c.workers = 1;
  return c;
}

SubgroupAuditResult cell(const std::string& attr, const std::string& level, double mean_diff,
                         CellStatus status = CellStatus::kOk) {
  SubgroupAuditResult r;
  r.attribute = attr;
  r.level = level;
  r.metric = Metric::kAuroc;
  r.mean_diff = mean_diff;
  r.status = status;
  return r;
}

MatchedAuditResult matched(const std::string& attr, const std::string& level, std::vector<double> diffs) {
  MatchedAuditResult r;
  r.attribute = attr;
  r.level = level;
  r.metric = Metric::kAuroc;
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    r.opponents.push_back("o" + std::to_string(i));
    r.cells.push_back(cell(attr, level, diffs[i]));
  }
  return r;
}

}  // namespace

TEST(DiffsFromAverage, Examples) {
  const std::vector<std::optional<double>> v{0.9, 0.7, 0.8};
  const auto d = diffs_from_average(v);
  EXPECT_NEAR(*d[0], 0.1, 1e-15);
  EXPECT_NEAR(*d[1], -0.1, 1e-15);
  EXPECT_NEAR(*d[2], 0.0, 1e-15);
  const std::vector<std::optional<double>> gap{0.6, std::nullopt, 0.4};
  const auto g = diffs_from_average(gap);
  EXPECT_FALSE(g[1].has_value());
  EXPECT_NEAR(*g[0], 0.1, 1e-15);
  const std::vector<std::optional<double>> lone{0.6, std::nullopt};
  EXPECT_TRUE(diffs_from_average(lone).empty());
}

TEST(GroupDiffs, OppositeRankings) {
  const auto cohort = fixture::cohort_from_csv(
      "id,label,score,grp\nr1,0,0.2,A\nr2,1,0.8,A\nr3,0,0.8,B\nr4,1,0.2,B\n", group_schema());
  const std::vector<std::size_t> all{0, 1, 2, 3};
  const auto d = group_diffs(cohort, all, "grp", "m", Metric::kAuroc, 0.5);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0].level, "A");
  EXPECT_EQ(*d[0].value, 1.0);
  EXPECT_EQ(*d[0].diff, 0.5);
  EXPECT_EQ(*d[1].diff, -0.5);
  const auto sens = group_diffs(cohort, all, "grp", "m", Metric::kSens, 0.5);
  EXPECT_EQ(*sens[0].diff, 0.5);
  const std::vector<std::size_t> only_a{0, 1};
  EXPECT_THROW(group_diffs(cohort, only_a, "grp", "m", Metric::kAuroc, 0.5), StatisticalError);
}

TEST(GroupDiffs, MissingLevelIsItsOwnGroup) {
  const auto cohort = fixture::cohort_from_csv(
      "id,label,score,grp\nr1,0,0.2,A\nr2,1,0.8,A\nr3,0,0.6,NA\nr4,1,0.7,NA\n", group_schema());
  const std::vector<std::size_t> all{0, 1, 2, 3};
  const auto d = group_diffs(cohort, all, "grp", "m", Metric::kAuroc, 0.5);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[1].level, "NA");
}

TEST(Bootstrap, ReplicateDiffsSumToZero) {
  const auto gen = generate(oracle::base_config(1500, 3));
  AuditTrace trace;
  const auto out = bootstrap_audit(gen.cohort, "oracle", quick_config(), &trace);
  ASSERT_EQ(trace.attributes.size(), 3u);
  std::size_t checked = 0;
  for (const auto& attr : trace.diffs)
    for (const auto& metric : attr)
      for (const auto& rep : metric) {
        double sum = 0.0;
        for (const auto& d : rep) sum += d.value_or(0.0);
        EXPECT_LT(std::fabs(sum), 1e-12);
        ++checked;
      }
  EXPECT_EQ(checked, 3u * 3u * 30u);
  EXPECT_EQ(out.results.size(), (2u + 3u + 3u) * 3u);
}

TEST(Bootstrap, TwoReplicatesGiveOneDegreeOfFreedom) {
  const auto gen = generate(oracle::base_config(800, 5));
  auto cfg = quick_config(2);
  cfg.attributes = {"sex"};
  const auto out = bootstrap_audit(gen.cohort, "oracle", cfg);
  for (const auto& r : out.results) {
    ASSERT_EQ(r.n_effective, 2u);
    if (!r.degenerate) EXPECT_NEAR(r.p_value, student_t_two_sided_p(r.t_stat, 1.0), 1e-15);
  }
}

TEST(Bootstrap, IndependentOfWorkerCount) {
  const auto gen = generate(oracle::confounded_config(1200, 7, 0.5));
  auto one = quick_config(24);
  one.propensity_covariates = {"confounder", "noise"};
  auto four = one;
  four.workers = 4;
  const auto plans = plan_contrasts(gen.cohort, one);
  EXPECT_EQ(run_audit(gen.cohort, "oracle", one, plans), run_audit(gen.cohort, "oracle", four, plans));
}

TEST(Bootstrap, SmallLevelsAreExcluded) {
  const auto gen = generate(oracle::base_config(400, 13));
  auto cfg = quick_config(10);
  cfg.attributes = {"race"};
  const auto out = bootstrap_audit(gen.cohort, "oracle", cfg);
  ASSERT_FALSE(out.excluded.empty());
  for (const auto& e : out.excluded) {
    EXPECT_LT(e.count, cfg.min_group_size);
    for (const auto& r : out.results) EXPECT_NE(r.level, e.level);
  }
}

TEST(Discrepancy, BeforeAndAfterExamples) {
  const std::vector<SubgroupAuditResult> before{cell("race", "H", 0.02), cell("race", "W", -0.01),
                                                cell("race", "B", -0.01)};
  const std::vector<MatchedAuditResult> after{matched("race", "H", {0.03, 0.01}), matched("race", "W", {-0.01, -0.01}),
                                              matched("race", "B", {0.01, -0.03})};
  const auto s = summarize_discrepancy(before, after, Metric::kAuroc, ModelRole::kWithProtected);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].matching, MatchingCondition::kBeforeMatching);
  EXPECT_NEAR(s[0].gap, 0.03, 1e-15);
  EXPECT_EQ(s[1].matching, MatchingCondition::kAfterMatching);
  EXPECT_NEAR(s[1].gap, 0.03, 1e-15);
  EXPECT_EQ(s[1].n_levels, 3u);
  EXPECT_EQ(s[1].role, ModelRole::kWithProtected);
}

TEST(Discrepancy, IgnoresOrderAndNonOkCells) {
  std::vector<SubgroupAuditResult> before{cell("a", "x", 0.05), cell("a", "y", -0.02), cell("a", "z", -0.03),
                                          cell("a", "w", 0.4, CellStatus::kInsufficient)};
  const auto s = summarize_discrepancy(before, {}, Metric::kAuroc, ModelRole::kWithoutProtected);
  std::reverse(before.begin(), before.end());
  EXPECT_EQ(summarize_discrepancy(before, {}, Metric::kAuroc, ModelRole::kWithoutProtected), s);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_NEAR(s[0].gap, 0.08, 1e-15);
  const std::vector<SubgroupAuditResult> lone{cell("a", "x", 0.05)};
  EXPECT_TRUE(summarize_discrepancy(lone, {}, Metric::kAuroc, ModelRole::kWithoutProtected).empty());
}

TEST(Compare, SelfComparisonHasZeroDeltas) {
  const auto gen = generate(oracle::base_config(1000, 17));
  const auto rep = compare_models(gen.cohort, "oracle", "oracle", quick_config(12));
  ASSERT_FALSE(rep.deltas.empty());
  for (const auto& d : rep.deltas) EXPECT_EQ(d.delta, 0.0);
  EXPECT_THROW(compare_models(gen.cohort, "oracle", "missing", quick_config(12)), ValidationError);
}

TEST(Matched, TwoLevelAttributeHasOneOpponent) {
  const auto gen = generate(oracle::confounded_config(1500, 19, 0.5));
  auto cfg = quick_config(20);
  cfg.propensity_covariates = {"confounder", "noise"};
  const auto plans = plan_contrasts(gen.cohort, cfg);
  ASSERT_EQ(plans.size(), 1u);
  const auto res = matched_audit(gen.cohort, "oracle", cfg, plans);
  ASSERT_EQ(res.size(), 2u * cfg.metrics.size());
  for (const auto& r : res) {
    ASSERT_EQ(r.cells.size(), 1u);
    EXPECT_EQ(r.cells[0].status, CellStatus::kOk);
    EXPECT_NE(r.opponents[0], r.level);
  }
  for (std::size_t i = 0; i + 1 < res.size(); i += 2)
    EXPECT_NEAR(res[i].cells[0].mean_diff + res[i + 1].cells[0].mean_diff, 0.0, 1e-12);
}

TEST(Matched, ThreeLevelAttributeHasTwoOpponents) {
  auto c = oracle::confounded_config(2400, 23, 0.4);
  c.protected_attributes[0].levels = {{"A", 0.4}, {"B", 0.3}, {"C", 0.3}};
  const auto gen = generate(c);
  auto cfg = quick_config(12);
  cfg.metrics = {Metric::kAuroc};
  cfg.propensity_covariates = {"confounder"};
  const auto plans = plan_contrasts(gen.cohort, cfg);
  ASSERT_EQ(plans.size(), 3u);
  const auto res = matched_audit(gen.cohort, "oracle", cfg, plans);
  ASSERT_EQ(res.size(), 3u);
  for (const auto& r : res) {
    EXPECT_EQ(r.cells.size(), 2u);
    EXPECT_EQ(std::count(r.opponents.begin(), r.opponents.end(), r.level), 0);
  }
}

TEST(Matched, SmallContrastIsSkipped) {
  const auto gen = generate(oracle::confounded_config(300, 29, 0.5));
  auto cfg = quick_config(10);
  cfg.propensity_covariates = {"confounder"};
  cfg.min_matched_n = 1000;
  const auto plans = plan_contrasts(gen.cohort, cfg);
  ASSERT_EQ(plans.size(), 1u);
  EXPECT_EQ(plans[0].status, CellStatus::kSkipped);
  for (const auto& r : matched_audit(gen.cohort, "oracle", cfg, plans))
    EXPECT_EQ(r.cells[0].status, CellStatus::kSkipped);
}
