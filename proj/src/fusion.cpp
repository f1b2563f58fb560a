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

#include "survmamba/fusion.hpp"

namespace survmamba {

ModalityStream::ModalityStream(Index d_model, Index conv_width, const SsmConfig& ssm_cfg, Rng& rng)
  : norm(d_model),
    to_x(d_model, d_model, true, rng),
    to_z(d_model, d_model, true, rng),
    ssm(d_model, ssm_cfg, rng)
{
  if (conv_width <= 0) fail(ErrorKind::Config, "conv width must be positive");
  conv_kernel = parameter(uniform_tensor({conv_width, d_model}, 1.0 / std::sqrt(double(conv_width)), rng));
  conv_bias = parameter(Tensor::zeros({d_model}));
}

std::pair<Var, Var> ModalityStream::operator()(const Var& f) const
{
  Var normed = norm(f);
  Var x = to_x(normed);
  Var z = to_z(normed);
  Var y = ssm(silu(add_bias(depthwise_conv1d(x, conv_kernel), conv_bias)));
  return {y, z};
}

void ModalityStream::collect(ParamList& out, const std::string& prefix) const
{
  norm.collect(out, prefix + ".norm");
  to_x.collect(out, prefix + ".to_x");
  to_z.collect(out, prefix + ".to_z");
  out.push_back({prefix + ".conv.kernel", conv_kernel});
  out.push_back({prefix + ".conv.bias", conv_bias});
  ssm.collect(out, prefix + ".ssm");
}

LocalInteractionBlock::LocalInteractionBlock(Index d_model, const LocalBlockConfig& cfg, Rng& rng)
  : histology(d_model, cfg.conv_width, cfg.ssm, rng), protein(d_model, cfg.conv_width, cfg.ssm, rng)
{
}

std::pair<Var, Var> LocalInteractionBlock::operator()(const Var& f_h, const Var& f_p) const
{
  if (f_h.value().rank() != 2 || f_p.value().rank() != 2 || f_h.rows() != f_p.rows())
    fail(ErrorKind::Alignment, "local block: modalities must share the patch count, got " +
                                   shape_str(f_h.shape()) + " and " + shape_str(f_p.shape()));
  auto [y_h, z_h] = histology(f_h);
  auto [y_p, z_p] = protein(f_p);
  Var out_h = add(mul(y_h, silu(z_p)), f_h);
  Var out_p = add(mul(y_p, silu(z_h)), f_p);
  return {out_h, out_p};
}

void LocalInteractionBlock::collect(ParamList& out, const std::string& prefix) const
{
  histology.collect(out, prefix + ".histology");
  protein.collect(out, prefix + ".protein");
}

Var ordered_concat(const Var& f_h, const Var& f_p) { return concat_rows(f_h, f_p); }

GlobalEnhanceBlock::GlobalEnhanceBlock(Index d_model, const GlobalBlockConfig& cfg, Rng& rng)
  : scan(d_model, cfg.mamba, cfg.tie_directions, rng), residual_(cfg.residual)
{
}

Var GlobalEnhanceBlock::operator()(const Var& f_c) const
{
  Var out = scan(f_c);
  return residual_ ? add(out, f_c) : out;
}

void GlobalEnhanceBlock::collect(ParamList& out, const std::string& prefix) const
{
  scan.collect(out, prefix + ".bimamba");
}

FusionTrunk::FusionTrunk(const TrunkConfig& cfg, Rng& rng) : cfg_(cfg)
{
  if (cfg.n_local < 0 || cfg.n_global < 0) fail(ErrorKind::Config, "block counts must be >= 0");
  for (Index i = 0; i < cfg.n_local; ++i) local_blocks.emplace_back(cfg.d_model, cfg.local, rng);
  for (Index i = 0; i < cfg.n_global; ++i) global_blocks.emplace_back(cfg.d_model, cfg.global, rng);
}

Var FusionTrunk::operator()(const Var& f_h, const Var& f_p) const
{
  Var h = f_h;
  Var p = f_p;
  for (const auto& block : local_blocks) std::tie(h, p) = block(h, p);
  Var fc = ordered_concat(h, p);
  for (const auto& block : global_blocks) fc = block(fc);
  return fc;
}

Var FusionTrunk::forward_unimodal(const Var& f_h) const
{
  Var fc = f_h;
  for (const auto& block : global_blocks) fc = block(fc);
  return fc;
}

void FusionTrunk::collect(ParamList& out, const std::string& prefix) const
{
  for (std::size_t i = 0; i < local_blocks.size(); ++i)
    local_blocks[i].collect(out, prefix + ".local" + std::to_string(i));
  for (std::size_t i = 0; i < global_blocks.size(); ++i)
    global_blocks[i].collect(out, prefix + ".global" + std::to_string(i));
}

ParamList FusionTrunk::local_params() const
{
  ParamList out;
  for (std::size_t i = 0; i < local_blocks.size(); ++i)
    local_blocks[i].collect(out, "local" + std::to_string(i));
  return out;
}

ParamList FusionTrunk::global_params() const
{
  ParamList out;
  for (std::size_t i = 0; i < global_blocks.size(); ++i)
    global_blocks[i].collect(out, "global" + std::to_string(i));
  return out;
}

}  // namespace survmamba
