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

// Independent reference implementations used by the unit and acceptance
// suites. Nothing here calls the library code it is meant to check.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fairaudit/synth.hpp"

namespace oracle {

// AUROC by enumerating every (positive, negative) pair: wins count 2,
// ties 1, divided by 2 * P * N with the same final division as the library.
inline double pairwise_auroc(std::span<const int> labels, std::span<const double> scores) {
  std::uint64_t twice = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg) += 1;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j] != 0) continue;
      if (scores[i] > scores[j]) twice += 2;
      else if (scores[i] == scores[j]) twice += 1;
    }
  }
  return static_cast<double>(twice) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

// Youden's J at threshold t computed from scratch with the >= rule.
inline double youden_j(std::span<const int> labels, std::span<const double> scores, double t) {
  double tp = 0, fn = 0, tn = 0, fp = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred = scores[i] >= t;
    if (labels[i]) (pred ? tp : fn) += 1;
    else (pred ? fp : tn) += 1;
  }
  return tp / (tp + fn) + tn / (tn + fp) - 1.0;
}

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
inline std::pair<std::vector<long double>, std::vector<long double>> gauss_legendre(int n) {
  std::vector<long double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
  const long double pi = std::numbers::pi_v<long double>;
  for (int i = 0; i < n; ++i) {
    long double z = std::cos(pi * (i + 0.75L) / (n + 0.5L));
    long double dp = 0;
    for (int it = 0; it < 100; ++it) {
      long double p0 = 1, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const long double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1);
      const long double dz = p1 / dp;
      z -= dz;
      if (std::fabs(dz) < 1e-19L) break;
    }
    x[static_cast<std::size_t>(i)] = z;
    w[static_cast<std::size_t>(i)] = 2 / ((1 - z * z) * dp * dp);
  }
  return {x, w};
}

// Composite Gauss-Legendre quadrature of f over [a, b].
inline long double integrate(const std::function<long double(long double)>& f, long double a, long double b,
                             int panels = 400) {
  static const auto rule = gauss_legendre(20);
  const auto& [x, w] = rule;
  long double total = 0;
  const long double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const long double lo = a + p * h, mid = lo + h / 2;
    for (std::size_t k = 0; k < x.size(); ++k) total += w[k] * f(mid + h / 2 * x[k]);
  }
  return total * h / 2;
}

// Two-sided Student-t p-value as 1 - 2 * integral of the density over [0, |t|].
inline double t_two_sided_p(double t, double df) {
  const long double nu = df;
  const long double log_c = std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2) -
                            0.5L * std::log(nu * std::numbers::pi_v<long double>);
  auto density = [&](long double x) { return std::exp(log_c - (nu + 1) / 2 * std::log1p(x * x / nu)); };
  const long double central = integrate(density, 0, std::fabs(static_cast<long double>(t)), 2000);
  return static_cast<double>(1 - 2 * central);
}

// Central finite difference of f along coordinate k.
inline double central_difference(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                                 std::size_t k, double h) {
  const double x0 = x[k];
  x[k] = x0 + h;
  const double up = f(x);
  x[k] = x0 - h;
  const double down = f(x);
  return (up - down) / (2 * h);
}

// --- synthetic cohort recipes --------------------------------------------------

// Two-level sex attribute, three-level race attribute, continuous age,
// three gaussian covariates driving the outcome; oracle scores.
inline fairaudit::SynthConfig base_config(std::size_t n, std::uint64_t seed) {
  using namespace fairaudit;
  SynthConfig c;
  c.n = n;
  c.seed = seed;
  ProtectedSpec sex;
  sex.name = "sex";
  sex.levels = {{"F", 0.5}, {"M", 0.5}};
  ProtectedSpec race;
  race.name = "race";
  race.levels = {{"White", 0.6}, {"Black", 0.25}, {"Hispanic", 0.15}};
  ProtectedSpec age;
  age.name = "age";
  age.kind = ProtectedKind::kContinuous;
  age.lo = 18;
  age.hi = 90;
  age.integer = true;
  c.protected_attributes = {sex, race, age};
  for (const char* name : {"x1", "x2", "x3"}) {
    CovariateSpec cov;
    cov.name = name;
    c.covariates.push_back(cov);
  }
  c.outcome.intercept = -1.0;
  c.outcome.coefficients = {{"x1", 1.0}, {"x2", 0.8}, {"x3", -0.6}};
  c.score.sigma = 0.05;
  return c;
}

// One binary protected attribute whose level "A" has share `share`, and one
// confounder whose mean is shifted by `effect` standard deviations in "A".
inline fairaudit::SynthConfig confounded_config(std::size_t n, std::uint64_t seed, double effect, double share = 0.3) {
  using namespace fairaudit;
  SynthConfig c;
  c.n = n;
  c.seed = seed;
  ProtectedSpec grp;
  grp.name = "group";
  grp.levels = {{"A", share}, {"B", 1.0 - share}};
  c.protected_attributes = {grp};
  CovariateSpec conf;
  conf.name = "confounder";
  if (effect != 0.0) conf.depends = {{"group", "A", effect, 0.0}};
  CovariateSpec noise;
  noise.name = "noise";
  c.covariates = {conf, noise};
  c.outcome.intercept = -0.5;
  c.outcome.coefficients = {{"confounder", 1.0}, {"noise", 0.5}};
  c.score.sigma = 0.05;
  return c;
}

}  // namespace oracle
