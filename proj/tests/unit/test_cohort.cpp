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
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "fairaudit/cohort.hpp"

using namespace fairaudit;

namespace {

CohortSchema simple_schema() {
  CohortSchema s;
  s.score_columns = {{"m", "score"}};
  s.protected_columns = {{"race", ProtectedKind::kCategorical, {}}};
  return s;
}

ParsedCohort parse_text(const std::string& text, const CohortSchema& schema) {
  std::istringstream in(text);
  return parse_cohort(in, schema);
}

CohortRecord record(const std::string& id, int label, double score, std::optional<std::string> level) {
  CohortRecord r;
  r.id = id;
  r.label = label;
  r.scores = {score};
  r.protected_levels = {std::move(level)};
  r.protected_raw = {std::nullopt};
  return r;
}

}  // namespace

TEST(ParseCohort, FourRowExample) {
  const auto parsed = parse_text("id,label,score,race\na,0,0.1,W\nb,0,0.4,B\nc,1,0.35,W\nd,1,0.8,B\n", simple_schema());
  const auto& c = parsed.cohort;
  ASSERT_EQ(c.size(), 4u);
  EXPECT_TRUE(parsed.rejected.empty());
  std::vector<int> labels;
  std::vector<double> scores;
  for (const auto& r : c.records) {
    labels.push_back(r.label);
    scores.push_back(*r.scores[0]);
  }
  EXPECT_EQ(labels, (std::vector<int>{0, 0, 1, 1}));
  EXPECT_EQ(scores, (std::vector<double>{0.1, 0.4, 0.35, 0.8}));
  EXPECT_EQ(c.levels("race"), (std::vector<std::string>{"W", "B"}));
}

TEST(ParseCohort, BadLabelCitesLine) {
  try {
    parse_text("id,label,score,race\na,0,0.1,W\nb,2,0.4,B\n", simple_schema());
    FAIL() << "expected RowError";
  } catch (const RowError& e) {
    ASSERT_EQ(e.issues().size(), 1u);
    EXPECT_EQ(e.issues()[0].line, 3u);
    EXPECT_EQ(e.issues()[0].column, "label");
  }
}

TEST(ParseCohort, ScoreOutOfRange) {
  try {
    parse_text("id,label,score,race\na,0,1.2,W\n", simple_schema());
    FAIL() << "expected RowError";
  } catch (const RowError& e) {
    ASSERT_FALSE(e.issues().empty());
    EXPECT_NE(e.issues()[0].message.find("score out of [0,1]"), std::string::npos);
  }
}

TEST(ParseCohort, CollectsEveryBadRow) {
  try {
    parse_text("id,label,score,race\na,x,0.1,W\nb,1,abc,B\nc,1,0.5\n", simple_schema());
    FAIL() << "expected RowError";
  } catch (const RowError& e) {
    ASSERT_EQ(e.issues().size(), 3u);
    EXPECT_EQ(e.issues()[0].line, 2u);
    EXPECT_EQ(e.issues()[1].line, 3u);
    EXPECT_EQ(e.issues()[2].line, 4u);
  }
}

TEST(ParseCohort, MissingHeaderColumnNamed) {
  try {
    parse_text("id,label,race\na,0,W\n", simple_schema());
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("score"), std::string::npos);
  }
}

TEST(ParseCohort, DuplicateIdIsValidationError) {
  try {
    parse_text("id,label,score,race\na,0,0.1,W\na,1,0.4,B\n", simple_schema());
    FAIL() << "expected ValidationError";
  } catch (const RowError&) {
    FAIL() << "duplicate ids are not row errors";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos);
  }
}

TEST(ParseCohort, RejectsMissingLabelOrScores) {
  const auto parsed = parse_text("id,label,score,race\na,NA,0.1,W\nb,1,,B\nc,1,0.3,NA\nd,0,0.2,W\n", simple_schema());
  EXPECT_EQ(parsed.cohort.size(), 2u);
  ASSERT_EQ(parsed.rejected.size(), 2u);
  EXPECT_EQ(parsed.rejected[0].line, 2u);
  EXPECT_EQ(parsed.rejected[1].line, 3u);
  EXPECT_FALSE(parsed.cohort.records[0].protected_levels[0].has_value());
}

TEST(ParseCohort, QuotedFieldsTabsAndComments) {
  auto schema = simple_schema();
  schema.delimiter = '\t';
  const auto parsed = parse_text("# comment\nid\tlabel\tscore\trace\n\"x\ty\"\t1\t0.5\tW\nz\t0\t0.25\tB\n", schema);
  ASSERT_EQ(parsed.cohort.size(), 2u);
  EXPECT_EQ(parsed.cohort.records[0].id, "x\ty");
}

TEST(ParseCohort, RoundTrip) {
  CohortSchema s;
  s.score_columns = {{"m1", "s1"}, {"m2", "s2"}};
  s.protected_columns = {{"race", ProtectedKind::kCategorical, {}}, {"age", ProtectedKind::kContinuous, {}}};
  s.covariate_columns = {{"bmi", CovariateKind::kNumeric}, {"smoker", CovariateKind::kBinary}, {"proc", CovariateKind::kCategorical}};
  const std::string text =
      "id,label,s1,s2,race,age,bmi,smoker,proc\n"
      "p1,0,0.1,0.2,W,30,22.5,0,knee\n"
      "p2,1,0.9,,B,45,NA,1,\"hip, left\"\n"
      "p3,1,0.7,0.6,NA,61,30.25,NA,knee\n"
      "p4,0,0.3,0.35,W,NA,27,0,NA\n"
      "p5,0,0.2,0.1,B,75,19,1,spine\n";
  const auto first = parse_text(text, s);
  std::ostringstream out;
  write_cohort(out, first.cohort);
  const auto second = parse_text(out.str(), s);
  EXPECT_EQ(first.cohort, second.cohort);
  EXPECT_EQ(first.cohort.size(), 5u);
}

TEST(BinContinuous, UniformAgesGiveEqualTertiles) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(14.0, 102.0);
  std::vector<std::optional<double>> ages;
  for (int i = 0; i < 1200; ++i) ages.emplace_back(u(gen));
  const auto res = bin_continuous(ages, BinStrategy::tertiles());
  ASSERT_EQ(res.edges.size(), 4u);
  // Brute-force count per interval from the returned cut points.
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& a : ages) {
    if (*a < res.edges[1]) ++counts[0];
    else if (*a < res.edges[2]) ++counts[1];
    else ++counts[2];
  }
  for (auto c : counts) EXPECT_NEAR(static_cast<double>(c), 400.0, 1.0);
  std::map<std::string, std::size_t> by_label;
  for (const auto& l : res.labels) ++by_label[*l];
  EXPECT_EQ(by_label.size(), 3u);
}

TEST(BinContinuous, ExplicitEdgesClosedLastBin) {
  std::vector<std::optional<double>> v{74.0, 18.0, 56.9, 90.0, 91.0, std::nullopt};
  const auto res = bin_continuous(v, BinStrategy::explicit_edges({18, 57, 74, 90}));
  EXPECT_EQ(*res.labels[0], "[74 - 90]");
  EXPECT_EQ(*res.labels[1], "[18 - 57)");
  EXPECT_EQ(*res.labels[2], "[18 - 57)");
  EXPECT_EQ(*res.labels[3], "[74 - 90]");
  EXPECT_FALSE(res.labels[4].has_value());
  EXPECT_FALSE(res.labels[5].has_value());
}

TEST(BinContinuous, DegenerateTertilesThrow) {
  std::vector<std::optional<double>> v{1.0, 1.0, 1.0, 1.0};
  try {
    bin_continuous(v, BinStrategy::tertiles());
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("explicit"), std::string::npos);
  }
  std::vector<std::optional<double>> none{std::nullopt, std::nullopt};
  EXPECT_THROW(bin_continuous(none, BinStrategy::tertiles()), ValidationError);
}

TEST(BinContinuous, PermutationInvariantEdges) {
  std::mt19937_64 gen(11);
  std::vector<std::optional<double>> v;
  for (int i = 0; i < 300; ++i) v.emplace_back(static_cast<double>(gen() % 80));
  const auto ref = bin_continuous(v, BinStrategy::tertiles()).edges;
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(v.begin(), v.end(), gen);
    EXPECT_EQ(bin_continuous(v, BinStrategy::tertiles()).edges, ref);
  }
}

TEST(SubgroupPartition, TableOneShape) {
  std::vector<CohortRecord> recs;
  int id = 0;
  auto add = [&](std::optional<std::string> level, int count) {
    for (int i = 0; i < count; ++i) recs.push_back(record("r" + std::to_string(id++), i % 2, 0.5, level));
  };
  add("White", 2747);
  add("Black", 971);
  add(std::nullopt, 94);
  const auto cohort = make_cohort(simple_schema(), recs);
  const auto part = subgroup_partition(cohort, "race", 100);
  ASSERT_EQ(part.groups.size(), 2u);
  std::map<std::string, std::size_t> sizes;
  for (const auto& g : part.groups) sizes[g.level] = g.indices.size();
  EXPECT_EQ(sizes["Black"], 971u);
  EXPECT_EQ(sizes["White"], 2747u);
  ASSERT_EQ(part.excluded.size(), 1u);
  EXPECT_EQ(part.excluded[0].level, "NA");
  EXPECT_EQ(part.excluded[0].count, 94u);
  EXPECT_EQ(part.excluded[0].reason, "missing");
}

TEST(SubgroupPartition, SingleLevelThrows) {
  const auto cohort = make_cohort(simple_schema(), {record("a", 0, 0.1, "W"), record("b", 1, 0.9, "W")});
  try {
    subgroup_partition(cohort, "race", 0);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("nothing to compare"), std::string::npos);
  }
  EXPECT_THROW(subgroup_partition(cohort, "sex", 0), ValidationError);
}

TEST(SubgroupPartition, NoFilteringAtZero) {
  const auto cohort = make_cohort(simple_schema(), {record("a", 0, 0.1, "W"), record("b", 1, 0.9, "B")});
  const auto part = subgroup_partition(cohort, "race", 0);
  EXPECT_EQ(part.groups.size(), 2u);
  EXPECT_TRUE(part.excluded.empty());
}

TEST(SubgroupPartition, CompletenessAndDisjointness) {
  std::mt19937_64 gen(3);
  const char* levels[] = {"A", "B", "C", "D"};
  std::vector<CohortRecord> recs;
  for (int i = 0; i < 500; ++i) {
    const auto k = gen() % 5;
    recs.push_back(record("r" + std::to_string(i), static_cast<int>(gen() % 2), 0.5,
                          k == 4 ? std::nullopt : std::optional<std::string>(levels[k])));
  }
  // Shrink level D so it falls below the threshold.
  for (auto& r : recs)
    if (r.protected_levels[0] == "D" && gen() % 4) r.protected_levels[0] = "A";
  const auto cohort = make_cohort(simple_schema(), recs);
  for (std::size_t min_size : {0u, 50u, 90u, 120u}) {
    SubgroupPartition part;
    try {
      part = subgroup_partition(cohort, "race", min_size);
    } catch (const ValidationError&) {
      continue;
    }
    std::set<std::size_t> seen;
    std::size_t total = 0;
    for (const auto& g : part.groups) {
      EXPECT_GE(g.indices.size(), min_size);
      for (auto i : g.indices) EXPECT_TRUE(seen.insert(i).second);
      total += g.indices.size();
    }
    for (const auto& e : part.excluded) total += e.count;
    EXPECT_EQ(total, cohort.size());
  }
}

TEST(MakeCohort, ContinuousLevelsOrderedByBin) {
  CohortSchema s;
  s.score_columns = {{"m", "score"}};
  s.protected_columns = {{"age", ProtectedKind::kContinuous, {}}};
  std::vector<CohortRecord> recs;
  const double ages[] = {80, 20, 50, 30, 60, 70, 40, 90, 25};
  for (int i = 0; i < 9; ++i) {
    CohortRecord r;
    r.id = std::to_string(i);
    r.label = i % 2;
    r.scores = {0.5};
    r.protected_levels = {std::nullopt};
    r.protected_raw = {ages[i]};
    recs.push_back(r);
  }
  const auto c = make_cohort(s, recs);
  EXPECT_EQ(c.levels("age"), (std::vector<std::string>{"[20 - 30)", "[30 - 60)", "[60 - 90]"}));
}

TEST(Schema, RejectsCollisions) {
  auto s = simple_schema();
  s.covariate_columns = {{"race", CovariateKind::kNumeric}};
  EXPECT_THROW(s.validate(), SchemaError);
  auto t = simple_schema();
  t.score_columns.clear();
  EXPECT_THROW(t.validate(), SchemaError);
}
