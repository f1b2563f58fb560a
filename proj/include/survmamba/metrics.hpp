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

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "survmamba/tensor.hpp"

namespace survmamba {

struct Prediction {
  std::string case_id;
  double risk = 0.0;
  double time = 0.0;
  int censor = 0;  // 0 = event, 1 = censored
};

using CohortPredictions = std::vector<Prediction>;

// Throws on duplicate ids, non-positive times or censor flags outside {0, 1}.
void validate_cohort(const CohortPredictions& preds);

// Harrell's concordance. A pair is comparable when the shorter of two
// strictly different times is an event; tied risks count one half.
double c_index(const CohortPredictions& preds);

struct KMCurve {
  std::vector<double> times;     // distinct event times, ascending
  std::vector<double> survival;  // S just after each time
  std::vector<Index> at_risk;
  std::vector<Index> events;

  // Right-continuous step function with S(t) = 1 before the first event.
  double at(double t) const;
};

// Product-limit estimate. Cases censored at t stay at risk for events at t.
KMCurve km_estimate(const CohortPredictions& group);

void write_km_csv(const std::string& path, const KMCurve& curve);

struct LogRankResult {
  double chi_square = 0.0;
  double p_value = 1.0;
  double observed_a = 0.0;
  double expected_a = 0.0;
  double variance = 0.0;
};

LogRankResult logrank_test(const CohortPredictions& group_a, const CohortPredictions& group_b);

// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);

// Upper-tail probability of a chi-square variate.
double chi_square_sf(double x, double dof);

struct RiskGroups {
  CohortPredictions low;
  CohortPredictions high;
  double median = 0.0;
};

// risk <= median goes low, > median goes high.
RiskGroups median_split(const CohortPredictions& preds);

}  // namespace survmamba
