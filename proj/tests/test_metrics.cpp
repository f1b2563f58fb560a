/*
 * Copyright 2026 The survmamba Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "survmamba/error.hpp"
#include "oracles.hpp"
#include "survmamba/metrics.hpp"

using namespace survmamba;
using namespace survmamba::testing;

namespace {

CohortPredictions cohort(const std::vector<double>& times, const std::vector<int>& censor,
                         const std::vector<double>& risks, const std::string& prefix = "c")
{
  CohortPredictions out;
  for (std::size_t i = 0; i < times.size(); ++i)
    out.push_back({prefix + std::to_string(i), risks[i], times[i], censor[i]});
  return out;
}

}  // namespace

TEST_CASE("c_index examples")
{
  CHECK(c_index(cohort({1, 2, 3}, {0, 0, 0}, {3, 2, 1})) == 1.0);
  CHECK(c_index(cohort({1, 2, 3}, {0, 0, 0}, {1, 2, 3})) == 0.0);
  CHECK(c_index(cohort({1, 2, 3}, {0, 1, 0}, {5, 4, 3})) == 1.0);
  CHECK(c_index(cohort({1, 2, 3}, {0, 0, 0}, {1, 1, 1})) == 0.5);
  try {
    (void)c_index(cohort({1, 2, 3}, {1, 1, 1}, {1, 2, 3}));
    FAIL("expected an undefined-metric error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UndefinedMetric);
  }
  CHECK_THROWS_AS(c_index(cohort({1, 0, 3}, {0, 0, 0}, {1, 2, 3})), Error);
  CHECK_THROWS_AS(c_index(cohort({1, 2, 3}, {0, 2, 0}, {1, 2, 3})), Error);
  auto dup = cohort({1, 2}, {0, 0}, {1, 2});
  dup[1].case_id = dup[0].case_id;
  CHECK_THROWS_AS(c_index(dup), Error);
}

TEST_CASE("c_index matches pair enumeration on every small cohort")
{
  std::mt19937_64 rng(60);
  std::uniform_int_distribution<int> risk_level(0, 3);
  int checked = 0;
  for (int n = 2; n <= 6; ++n) {
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    const int time_patterns = static_cast<int>(std::pow(3, n));
    for (int tp = 0; tp < time_patterns; ++tp) {
      std::vector<double> times;
      for (int i = 0, v = tp; i < n; ++i, v /= 3) times.push_back(1 + v % 3);
      for (int cp = 0; cp < (1 << n); ++cp) {
        std::vector<int> censor;
        std::vector<double> risks;
        for (int i = 0; i < n; ++i) {
          censor.push_back((cp >> i) & 1);
          risks.push_back(risk_level(rng));
        }
        const auto p = cohort(times, censor, risks);
        const double want = pair_oracle(p);
        if (want < 0) {
          CHECK_THROWS_AS(c_index(p), Error);
        } else {
          CHECK(c_index(p) == doctest::Approx(want).epsilon(1e-15));
          ++checked;
        }
      }
    }
  }
  CHECK(checked > 10000);
}

TEST_CASE("c_index is rank invariant and antisymmetric under negation")
{
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    CohortPredictions p;
    for (int i = 0; i < 40; ++i)
      p.push_back({"c" + std::to_string(i), 4 * unit(rng) - 2, 0.1 + 10 * unit(rng), unit(rng) < 0.3});
    const double c = c_index(p);
    auto mono = p, neg = p;
    for (auto& x : mono) x.risk = std::exp(x.risk);
    for (auto& x : neg) x.risk = -x.risk;
    CHECK(c_index(mono) == doctest::Approx(c).epsilon(1e-15));
    CHECK(c_index(neg) == doctest::Approx(1 - c).epsilon(1e-12));
    CHECK(c >= 0.0);
    CHECK(c <= 1.0);
  }
}

TEST_CASE("kaplan-meier examples")
{
  const KMCurve three = km_estimate(cohort({1, 2, 3}, {0, 0, 0}, {0, 0, 0}));
  REQUIRE(three.times.size() == 3);
  CHECK(three.survival[0] == doctest::Approx(2.0 / 3));
  CHECK(three.survival[1] == doctest::Approx(1.0 / 3));
  CHECK(three.survival[2] == 0.0);
  CHECK(three.at_risk == std::vector<Index>{3, 2, 1});
  CHECK(three.events == std::vector<Index>{1, 1, 1});
  CHECK(three.at(0.5) == 1.0);
  CHECK(three.at(1.0) == doctest::Approx(2.0 / 3));
  CHECK(three.at(2.5) == doctest::Approx(1.0 / 3));

  const KMCurve censored = km_estimate(cohort({1, 2, 3}, {1, 1, 1}, {0, 0, 0}));
  CHECK(censored.times.empty());
  CHECK(censored.at(100.0) == 1.0);

  const KMCurve half = km_estimate(cohort({1, 2}, {0, 1}, {0, 0}));
  CHECK(half.at(1.0) == 0.5);
  CHECK(half.at(5.0) == 0.5);

  // A case censored at an event time stays in that time's risk set.
  const KMCurve tie = km_estimate(cohort({1, 1, 2}, {0, 1, 0}, {0, 0, 0}));
  CHECK(tie.at_risk[0] == 3);
  CHECK(tie.survival[0] == doctest::Approx(2.0 / 3));
  CHECK(tie.survival[1] == 0.0);

  CHECK_THROWS_AS(km_estimate({}), Error);
}

TEST_CASE("kaplan-meier matches the product-limit oracle on every small cohort")
{
  int checked = 0;
  for (int n = 1; n <= 6; ++n) {
    const int time_patterns = static_cast<int>(std::pow(3, n));
    for (int tp = 0; tp < time_patterns; ++tp) {
      std::vector<double> times;
      for (int i = 0, v = tp; i < n; ++i, v /= 3) times.push_back(1 + v % 3);
      for (int cp = 0; cp < (1 << n); ++cp) {
        std::vector<int> censor;
        for (int i = 0; i < n; ++i) censor.push_back((cp >> i) & 1);
        const auto p = cohort(times, censor, std::vector<double>(static_cast<std::size_t>(n), 0.0));
        const KMCurve km = km_estimate(p);
        for (double t : {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0}) CHECK(km.at(t) == doctest::Approx(km_oracle(p, t)));
        for (std::size_t i = 1; i < km.survival.size(); ++i) CHECK(km.survival[i] <= km.survival[i - 1]);
        ++checked;
      }
    }
  }
  CHECK(checked == 3 * 2 + 9 * 4 + 27 * 8 + 81 * 16 + 243 * 32 + 729 * 64);
}

TEST_CASE("kaplan-meier csv layout")
{
  const auto path = std::filesystem::temp_directory_path() / "survmamba_km_test.csv";
  write_km_csv(path.string(), km_estimate(cohort({1, 2}, {0, 1}, {0, 0})));
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "time,survival,at_risk,events");
  CHECK(row.rfind("1,0.5,2,1", 0) == 0);
  std::filesystem::remove(path);
}

TEST_CASE("chi-square tail probabilities")
{
  CHECK(std::abs(chi_square_sf(3.841, 1) - chi1_sf_oracle(3.841)) < 1e-6);
  CHECK(chi_square_sf(3.841, 1) == doctest::Approx(0.05).epsilon(1e-3));
  for (double x : {0.0, 0.001, 0.1, 1.0, 2.7, 6.635, 10.83, 30.0, 80.0})
    CHECK(std::abs(chi_square_sf(x, 1) - chi1_sf_oracle(x)) < 1e-10);
  // Two degrees of freedom: exp(-x/2).
  for (double x : {0.5, 5.991, 20.0}) CHECK(chi_square_sf(x, 2) == doctest::Approx(std::exp(-x / 2)).epsilon(1e-12));
  CHECK(gamma_q(1.0, 0.0) == 1.0);
  CHECK_THROWS_AS(gamma_q(0.0, 1.0), Error);
  CHECK_THROWS_AS(chi_square_sf(-1.0, 1), Error);
}

TEST_CASE("log-rank examples")
{
  const auto a = cohort({1, 3, 5, 7}, {0, 1, 0, 0}, {0, 0, 0, 0}, "a");
  const auto a2 = cohort({1, 3, 5, 7}, {0, 1, 0, 0}, {0, 0, 0, 0}, "b");
  const auto same = logrank_test(a, a2);
  CHECK(same.chi_square == doctest::Approx(0.0));
  CHECK(same.p_value == doctest::Approx(1.0));

  const auto early = cohort({1, 2, 3}, {0, 0, 0}, {0, 0, 0}, "e");
  const auto late = cohort({10, 11, 12}, {0, 0, 0}, {0, 0, 0}, "l");
  const auto sep = logrank_test(early, late);
  // O = 3, E = 3/6 + 2/5 + 1/4, V = sum of hypergeometric variances over t = 1, 2, 3.
  const double e = 0.5 + 0.4 + 0.25;
  const double v = 0.25 + 0.24 + 0.1875;
  CHECK(sep.observed_a == 3.0);
  CHECK(sep.expected_a == doctest::Approx(e));
  CHECK(sep.variance == doctest::Approx(v));
  CHECK(sep.chi_square == doctest::Approx((3 - e) * (3 - e) / v));
  CHECK(sep.p_value < 0.05);

  const auto none = cohort({1, 2}, {1, 1}, {0, 0});
  try {
    (void)logrank_test(none, cohort({3, 4}, {1, 1}, {0, 0}, "z"));
    FAIL("expected an undefined-metric error");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::UndefinedMetric);
  }
  CHECK_THROWS_AS(logrank_test({}, early), Error);
}

TEST_CASE("log-rank matches the per-time oracle and is symmetric")
{
  std::mt19937_64 rng(62);
  std::uniform_int_distribution<int> t(1, 6);
  std::bernoulli_distribution cens(0.3);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    CohortPredictions a, b;
    for (int i = 0; i < 1 + trial % 7; ++i) a.push_back({"a" + std::to_string(i), 0, double(t(rng)), cens(rng)});
    for (int i = 0; i < 1 + trial % 5; ++i) b.push_back({"b" + std::to_string(i), 0, double(t(rng)), cens(rng)});
    const auto o = logrank_oracle(a, b);
    if (o.v <= 0) {
      CHECK_THROWS_AS(logrank_test(a, b), Error);
      continue;
    }
    const auto r = logrank_test(a, b);
    const auto s = logrank_test(b, a);
    CHECK(r.chi_square == doctest::Approx((o.o - o.e) * (o.o - o.e) / o.v).epsilon(1e-12));
    CHECK(r.p_value == doctest::Approx(chi1_sf_oracle(r.chi_square)).epsilon(1e-9));
    CHECK(s.chi_square == doctest::Approx(r.chi_square).epsilon(1e-12));
    CHECK(s.p_value == doctest::Approx(r.p_value).epsilon(1e-12));
    ++checked;
  }
  CHECK(checked > 200);
}

TEST_CASE("median split examples")
{
  const auto four = median_split(cohort({1, 2, 3, 4}, {0, 0, 0, 0}, {1, 2, 3, 4}));
  CHECK(four.low.size() == 2);
  CHECK(four.high.size() == 2);
  for (const auto& p : four.low) CHECK(p.risk <= 2);
  for (const auto& p : four.high) CHECK(p.risk >= 3);

  const auto flat = median_split(cohort({1, 2, 3}, {0, 0, 0}, {5, 5, 5}));
  CHECK(flat.low.size() == 3);
  CHECK(flat.high.empty());
  CHECK_THROWS_AS(logrank_test(flat.low, flat.high), Error);

  const auto odd = median_split(cohort({1, 2, 3}, {0, 0, 0}, {1, 2, 3}));
  CHECK(odd.median == 2.0);
  CHECK(odd.low.size() == 2);
  CHECK(odd.high.size() == 1);
  CHECK(odd.high[0].risk == 3.0);

  CHECK_THROWS_AS(median_split(cohort({1}, {0}, {1})), Error);
}
