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

#include <cmath>
#include <string>

#include "survmamba/nn.hpp"

namespace survmamba {

// Discrete-time survival over n intervals. Hazards h_1..h_n are conditional
// event probabilities per interval; interval labels k are 1-based.
//
// Censor flag convention: 0 = event observed, 1 = censored.

inline constexpr double kHazardClamp = 1e-7;

// prod_{i=1..k} (1 - h_i); k = 0 is the empty product.
template <typename Derived>
typename Derived::Scalar survival_at(const Eigen::MatrixBase<Derived>& hazards, Index k)
{
  if (k < 0 || k > hazards.size())
    fail(ErrorKind::Index, "survival_at: interval " + std::to_string(k) + " outside 0.." +
                               std::to_string(hazards.size()));
  typename Derived::Scalar s(1);
  for (Index i = 0; i < k; ++i) s *= (1 - hazards(i));
  return s;
}

//   -c log S(k) - (1 - c) log S(k-1) - (1 - c) log h_k
template <typename Derived>
typename Derived::Scalar survival_nll(const Eigen::MatrixBase<Derived>& hazards, Index k, int censor)
{
  using std::log;
  if (k < 1 || k > hazards.size())
    fail(ErrorKind::Index, "survival_nll: interval " + std::to_string(k) + " outside 1.." +
                               std::to_string(hazards.size()));
  if (censor != 0 && censor != 1) fail(ErrorKind::Domain, "survival_nll: censor must be 0 or 1");
  if (censor == 1) return -log(survival_at(hazards, k));
  return -log(survival_at(hazards, k - 1)) - log(hazards(k - 1));
}

// -sum_{k=1..n} S(k). Strictly increasing in every hazard.
template <typename Derived>
typename Derived::Scalar risk_score(const Eigen::MatrixBase<Derived>& hazards)
{
  typename Derived::Scalar s(1), total(0);
  for (Index i = 0; i < hazards.size(); ++i) {
    s *= (1 - hazards(i));
    total += s;
  }
  return -total;
}

// Differentiable form over a hazard vector Var of shape [n].
Var survival_nll(const Var& hazards, Index k, int censor);

// Max-pool over the sequence, linear classifier, sigmoid, clamp to
// [1e-7, 1 - 1e-7].
class HazardHead {
 public:
  HazardHead() = default;
  HazardHead(Index d_model, Index n_bins, Rng& rng);

  // [L x D] -> [n]
  Var operator()(const Var& sequence) const;

  Index bins() const { return classifier.out_features(); }
  void collect(ParamList& out, const std::string& prefix) const;

  Linear classifier;
};

}  // namespace survmamba
