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

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "../support/oracles.hpp"
#include "fairaudit/stats.hpp"

using namespace fairaudit;

TEST(TTest, WorkedExample) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const auto r = t_test_one_sample(x, 0.0);
  EXPECT_NEAR(r.t_stat, 3.0 / (std::sqrt(2.5) / std::sqrt(5.0)), 1e-12);
  EXPECT_NEAR(r.t_stat, 4.2426406871, 1e-9);
  EXPECT_EQ(r.df, 4u);
  EXPECT_NEAR(r.p_value, 0.013236, 1e-5);
  EXPECT_FALSE(r.degenerate);
}

TEST(TTest, SymmetricAroundNull) {
  const std::vector<double> x{-1, 1, -2, 2};
  const auto r = t_test_one_sample(x, 0.0);
  EXPECT_EQ(r.t_stat, 0.0);
  EXPECT_NEAR(r.p_value, 1.0, 1e-12);
}

TEST(TTest, DegenerateSamples) {
  const std::vector<double> zeros(10, 0.0);
  const auto z = t_test_one_sample(zeros, 0.0);
  EXPECT_TRUE(z.degenerate);
  EXPECT_EQ(z.p_value, 1.0);
  const std::vector<double> shifted(10, 0.2);
  const auto s = t_test_one_sample(shifted, 0.0);
  EXPECT_TRUE(s.degenerate);
  EXPECT_EQ(s.p_value, 0.0);
  EXPECT_TRUE(std::isinf(s.t_stat));
  EXPECT_THROW(t_test_one_sample(std::vector<double>{1.0}, 0.0), StatisticalError);
}

TEST(TTest, KnownQuantiles) {
  EXPECT_NEAR(student_t_two_sided_p(2.776445105, 4), 0.05, 1e-8);
  EXPECT_NEAR(student_t_two_sided_p(1.976013897, 149), 0.05, 1e-5);
  EXPECT_NEAR(student_t_two_sided_p(12.70620474, 1), 0.05, 1e-8);
  EXPECT_NEAR(student_t_two_sided_p(0.0, 10), 1.0, 1e-14);
}

TEST(TTest, PValueMatchesDensityIntegral) {
  for (double df : {1.0, 2.0, 3.0, 7.0, 29.0, 149.0}) {
    for (double t : {0.05, 0.4, 1.0, 1.96, 2.5, 4.0, 8.0}) {
      const double lib = student_t_two_sided_p(t, df);
      const double ref = oracle::t_two_sided_p(t, df);
      EXPECT_NEAR(lib, ref, 1e-9) << "t=" << t << " df=" << df;
      EXPECT_EQ(lib, student_t_two_sided_p(-t, df));
    }
  }
}

TEST(TTest, CdfIsMonotone) {
  double prev = 0.0;
  for (double t = -10.0; t <= 10.0; t += 0.25) {
    const double c = student_t_cdf(t, 5.0);
    EXPECT_GE(c, prev);
    prev = c;
  }
  EXPECT_NEAR(student_t_cdf(0.0, 5.0), 0.5, 1e-14);
}

TEST(TTest, NullRejectionRateMatchesAlpha) {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> z(0.0, 1.0);
  int rejected = 0;
  const int trials = 4000;
  for (int k = 0; k < trials; ++k) {
    std::vector<double> x(20);
    for (auto& v : x) v = z(gen);
    if (t_test_one_sample(x, 0.0).p_value < 0.05) ++rejected;
  }
  const double rate = static_cast<double>(rejected) / trials;
  EXPECT_GT(rate, 0.035);
  EXPECT_LT(rate, 0.065);
}

TEST(IncompleteBeta, EdgesAndSymmetry) {
  EXPECT_EQ(regularized_incomplete_beta(0.0, 2.0, 3.0), 0.0);
  EXPECT_EQ(regularized_incomplete_beta(1.0, 2.0, 3.0), 1.0);
  EXPECT_NEAR(regularized_incomplete_beta(0.3, 1.0, 1.0), 0.3, 1e-14);
  for (double x : {0.1, 0.35, 0.7, 0.95})
    EXPECT_NEAR(regularized_incomplete_beta(x, 2.5, 4.0) + regularized_incomplete_beta(1 - x, 4.0, 2.5), 1.0, 1e-13);
  EXPECT_THROW(regularized_incomplete_beta(0.5, 0.0, 1.0), StatisticalError);
}

TEST(MeanSd, SampleDenominator) {
  const std::vector<double> x{2, 4, 4, 4, 5, 5, 7, 9};
  const auto m = mean_sd(x);
  EXPECT_DOUBLE_EQ(m.mean, 5.0);
  EXPECT_NEAR(m.sd, std::sqrt(32.0 / 7.0), 1e-14);
}
