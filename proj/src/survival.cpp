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

#include "survmamba/survival.hpp"

namespace survmamba {

Var survival_nll(const Var& hazards, Index k, int censor)
{
  if (hazards.value().rank() != 1) fail(ErrorKind::Dimension, "survival_nll: hazards must be [n]");
  const auto h = hazards.value().storage();
  const double loss = survival_nll(h, k, censor);
  return make_result(Tensor::scalar(loss), {&hazards}, [hazards, k, censor](const Tensor& g) {
    const auto h = hazards.value().storage();
    Tensor gh(hazards.shape());
    // Terms -log(1 - h_i) contribute 1 / (1 - h_i); -log h_k contributes -1 / h_k.
    const Index survived = censor == 1 ? k : k - 1;
    for (Index i = 0; i < survived; ++i) gh[i] = g[0] / (1.0 - h[i]);
    if (censor == 0) gh[k - 1] = -g[0] / h[k - 1];
    accumulate_grad(hazards, std::move(gh));
  }, "survival_nll");
}

HazardHead::HazardHead(Index d_model, Index n_bins, Rng& rng)
{
  if (n_bins < 2) fail(ErrorKind::Config, "hazard head needs at least 2 intervals");
  classifier = Linear(d_model, n_bins, true, rng);
}

Var HazardHead::operator()(const Var& sequence) const
{
  if (sequence.value().rank() != 2) fail(ErrorKind::Dimension, "hazard head expects [L x D]");
  Var pooled = reshape(max_pool_sequence(sequence), {1, sequence.cols()});
  Var logits = classifier(pooled);
  Var h = clamp(sigmoid(logits), kHazardClamp, 1.0 - kHazardClamp);
  return reshape(h, {bins()});
}

void HazardHead::collect(ParamList& out, const std::string& prefix) const
{
  classifier.collect(out, prefix + ".classifier");
}

}  // namespace survmamba
