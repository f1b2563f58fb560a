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

#include <cstdint>

#include <json.hpp>

#include "survmamba/fusion.hpp"
#include "survmamba/survival.hpp"

namespace survmamba {

struct ModelConfig {
  Index hist_dim = 512;
  Index prot_dim = 50;
  Index hidden = 256;  // projection MLP hidden width
  Index d_model = 256;
  Index n_bins = 4;
  Index n_local = 2;
  Index n_global = 1;
  Index state = 16;
  Index expand = 2;
  Index conv_width = 4;
  bool selective = true;
  bool skip = true;
  bool global_residual = false;
  bool disable_pfe = false;   // drop the protein path entirely
  bool disable_liam = false;  // n_local forced to 0
  bool disable_giem = false;  // n_global forced to 0
  std::uint64_t seed = 7;

  Index local_blocks() const { return disable_liam || disable_pfe ? 0 : n_local; }
  Index global_blocks() const { return disable_giem ? 0 : n_global; }
  TrunkConfig trunk() const;
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Histology and protein projections, fusion trunk, hazard head.
class SurvivalModel {
 public:
  explicit SurvivalModel(const ModelConfig& cfg);

  // hist: [N x hist_dim], prot: [N x prot_dim] -> hazards [n_bins]
  Var hazards(const Tensor& hist, const Tensor& prot) const;
  // Untracked forward.
  double risk(const Tensor& hist, const Tensor& prot) const;

  ParamList params() const;
  const ModelConfig& config() const { return cfg_; }

  Mlp hist_proj;
  Mlp prot_proj;  // unset when the protein path is disabled
  FusionTrunk trunk;
  HazardHead head;

 private:
  ModelConfig cfg_;
};

}  // namespace survmamba
