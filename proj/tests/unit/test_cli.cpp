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

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "../support/oracles.hpp"
#include "fairaudit/cli.hpp"

using namespace fairaudit;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("fairaudit_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path synth_cohort(const fs::path& dir, std::size_t n) {
  write(dir / "synth.json", synth_config_to_json(oracle::base_config(n, 31)).dump(2));
  const auto r = cli({"synth", "--config", (dir / "synth.json").string(), "--out", (dir / "data").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  return dir / "data";
}

std::string audit_config(const std::string& attributes) {
  return R"({"cohort": "data/cohort.csv", "schema_file": "data/schema.json", "models": ["oracle"],
             "audit": {"metrics": ["AUROC"], "n_bootstrap": 8, "seed": 1, "workers": 1,
                       "attributes": )" +
         attributes + R"(, "propensity_covariates": ["x1", "x2"]},
             "output": {"dir": "out", "formats": ["json", "csv"]}})";
}

}  // namespace

TEST(Cli, SynthIsDeterministic) {
  const auto dir = fresh_dir("synth");
  const auto data = synth_cohort(dir, 400);
  const auto first = slurp(data / "cohort.csv");
  const auto r = cli({"synth", "--config", (dir / "synth.json").string(), "--out", (dir / "again").string()});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(fnv1a64_hex(slurp(dir / "again" / "cohort.csv")), fnv1a64_hex(first));
  EXPECT_EQ(slurp(dir / "again" / "manifest.json"), slurp(data / "manifest.json"));
  const auto other = cli({"synth", "--config", (dir / "synth.json").string(), "--out", (dir / "seeded").string(),
                          "--seed", "99"});
  ASSERT_EQ(other.code, 0);
  EXPECT_NE(slurp(dir / "seeded" / "cohort.csv"), first);
}

TEST(Cli, UnknownAttributeIsAValidationError) {
  const auto dir = fresh_dir("unknown");
  synth_cohort(dir, 300);
  write(dir / "audit.json", audit_config(R"(["ethnicity"])"));
  const auto r = cli({"audit", "--config", (dir / "audit.json").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("ethnicity"), std::string::npos);
}

TEST(Cli, AuditWritesReports) {
  const auto dir = fresh_dir("audit");
  synth_cohort(dir, 600);
  write(dir / "audit.json", audit_config(R"(["sex"])"));
  const auto r = cli({"audit", "--config", (dir / "audit.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "out" / "report.json"));
  EXPECT_TRUE(fs::exists(dir / "out" / "subgroups.csv"));
  const auto j = nlohmann::ordered_json::parse(slurp(dir / "out" / "report.json"));
  EXPECT_EQ(j.at("kind"), "fairaudit-report");
}

TEST(Cli, MatchOnTwoLevelAttribute) {
  const auto dir = fresh_dir("match");
  synth_cohort(dir, 800);
  write(dir / "audit.json", audit_config(R"(["sex"])"));
  const auto r = cli({"match", "--config", (dir / "audit.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::ordered_json::parse(slurp(dir / "out" / "balance.json"));
  EXPECT_EQ(j.at("kind"), "fairaudit-balance");
  EXPECT_EQ(j.at("contrasts").size(), 1u);
  EXPECT_TRUE(fs::exists(dir / "out" / "pairs_sex_F_vs_M.csv"));
}

TEST(Cli, MissingFilesAndBadArguments) {
  const auto dir = fresh_dir("io");
  EXPECT_EQ(cli({"audit", "--config", (dir / "absent.json").string()}).code, 4);
  write(dir / "broken.json", "{not json");
  EXPECT_EQ(cli({"audit", "--config", (dir / "broken.json").string()}).code, 2);
  EXPECT_NE(cli({"frobnicate"}).code, 0);
}

TEST(Cli, ValidateReportsRowErrors) {
  const auto dir = fresh_dir("validate");
  write(dir / "schema.json", R"({"scores": ["s"], "protected": [{"name": "g"}]})");
  write(dir / "cohort.csv", "id,label,s,g\na,0,0.2,x\nb,7,0.3,y\n");
  const auto r = cli({"validate", "--cohort", (dir / "cohort.csv").string(), "--schema", (dir / "schema.json").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("label"), std::string::npos);
}
