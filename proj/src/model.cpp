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

#include "survmamba/model.hpp"

namespace survmamba {

using nlohmann::json;

TrunkConfig ModelConfig::trunk() const
{
  TrunkConfig t;
  t.d_model = d_model;
  t.n_local = local_blocks();
  t.n_global = global_blocks();
  t.local.conv_width = conv_width;
  t.local.ssm.state = state;
  t.local.ssm.selective = selective;
  t.local.ssm.skip = skip;
  t.global.mamba.expand = expand;
  t.global.mamba.conv_width = conv_width;
  t.global.mamba.ssm = t.local.ssm;
  t.global.residual = global_residual;
  return t;
}

json to_json(const ModelConfig& c)
{
  return {{"hist_dim", c.hist_dim},         {"prot_dim", c.prot_dim},
          {"hidden", c.hidden},             {"d_model", c.d_model},
          {"n_bins", c.n_bins},             {"n_local", c.n_local},
          {"n_global", c.n_global},         {"state", c.state},
          {"expand", c.expand},             {"conv_width", c.conv_width},
          {"selective", c.selective},       {"skip", c.skip},
          {"global_residual", c.global_residual},
          {"disable_pfe", c.disable_pfe},   {"disable_liam", c.disable_liam},
          {"disable_giem", c.disable_giem}, {"seed", c.seed}};
}

ModelConfig model_config_from_json(const json& j)
{
  ModelConfig c;
  try {
    c.hist_dim = j.at("hist_dim");
    c.prot_dim = j.at("prot_dim");
    c.hidden = j.at("hidden");
    c.d_model = j.at("d_model");
    c.n_bins = j.at("n_bins");
    c.n_local = j.at("n_local");
    c.n_global = j.at("n_global");
    c.state = j.at("state");
    c.expand = j.at("expand");
    c.conv_width = j.at("conv_width");
    c.selective = j.at("selective");
    c.skip = j.at("skip");
    c.global_residual = j.at("global_residual");
    c.disable_pfe = j.at("disable_pfe");
    c.disable_liam = j.at("disable_liam");
    c.disable_giem = j.at("disable_giem");
    c.seed = j.at("seed");
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("checkpoint model metadata: ") + e.what());
  }
  return c;
}

SurvivalModel::SurvivalModel(const ModelConfig& cfg) : cfg_(cfg)
{
  if (cfg.hist_dim < 1 || cfg.prot_dim < 1 || cfg.hidden < 1 || cfg.d_model < 1)
    fail(ErrorKind::Config, "model widths must be positive");
  if (cfg.n_local < 0 || cfg.n_global < 0) fail(ErrorKind::Config, "block counts must be non-negative");
  Rng rng(cfg.seed);
  hist_proj = Mlp(cfg.hist_dim, cfg.hidden, cfg.d_model, rng);
  if (!cfg.disable_pfe) prot_proj = Mlp(cfg.prot_dim, cfg.hidden, cfg.d_model, rng);
  trunk = FusionTrunk(cfg.trunk(), rng);
  head = HazardHead(cfg.d_model, cfg.n_bins, rng);
}

Var SurvivalModel::hazards(const Tensor& hist, const Tensor& prot) const
{
  if (hist.cols() != cfg_.hist_dim)
    fail(ErrorKind::Dimension, "histology width " + std::to_string(hist.cols()) + ", model expects " +
                                   std::to_string(cfg_.hist_dim));
  const Var f_h = hist_proj(constant(hist));
  if (cfg_.disable_pfe) return head(trunk.forward_unimodal(f_h));
  if (prot.cols() != cfg_.prot_dim)
    fail(ErrorKind::Dimension, "protein width " + std::to_string(prot.cols()) + ", model expects " +
                                   std::to_string(cfg_.prot_dim));
  return head(trunk(f_h, prot_proj(constant(prot))));
}

double SurvivalModel::risk(const Tensor& hist, const Tensor& prot) const
{
  NoGradScope no_grad;
  const Var h = hazards(hist, prot);
  return risk_score(h.value().storage());
}

ParamList SurvivalModel::params() const
{
  ParamList out;
  hist_proj.collect(out, "hist_proj");
  if (!cfg_.disable_pfe) prot_proj.collect(out, "prot_proj");
  trunk.collect(out, "trunk");
  head.collect(out, "head");
  return out;
}

}  // namespace survmamba
