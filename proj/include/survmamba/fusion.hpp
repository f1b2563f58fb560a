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

#include <utility>
#include <vector>

#include "survmamba/ssm.hpp"

namespace survmamba {

// One modality stream of the local interaction block.
struct ModalityStream {
  LayerNorm norm;
  Linear to_x;  // D -> D
  Linear to_z;  // D -> D
  Var conv_kernel;  // [W x D]
  Var conv_bias;    // [D]
  SelectiveSsm ssm;

  ModalityStream() = default;
  ModalityStream(Index d_model, Index conv_width, const SsmConfig& ssm_cfg, Rng& rng);

  // Returns (y, z): the scanned sequence and the projection used to gate the
  // other modality.
  std::pair<Var, Var> operator()(const Var& f) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

struct LocalBlockConfig {
  Index conv_width = 4;
  SsmConfig ssm;
};

// Local interaction-aware block (LiAM). Each modality is normalized,
// projected twice, convolved and scanned; the scan output is gated by the
// other modality's projection and added back to its own input:
//   f_h' = y_h * silu(z_p) + f_h,  f_p' = y_p * silu(z_h) + f_p
class LocalInteractionBlock {
 public:
  LocalInteractionBlock() = default;
  LocalInteractionBlock(Index d_model, const LocalBlockConfig& cfg, Rng& rng);

  std::pair<Var, Var> operator()(const Var& f_h, const Var& f_p) const;
  void collect(ParamList& out, const std::string& prefix) const;

  ModalityStream histology;
  ModalityStream protein;
};

// Rows 0..N-1 are histology, rows N..2N-1 protein.
Var ordered_concat(const Var& f_h, const Var& f_p);

struct GlobalBlockConfig {
  MambaConfig mamba;
  bool tie_directions = false;
  bool residual = false;
};

// Global interaction-enhanced block (GiEM): bidirectional scan over the
// ordered concatenation.
class GlobalEnhanceBlock {
 public:
  GlobalEnhanceBlock() = default;
  GlobalEnhanceBlock(Index d_model, const GlobalBlockConfig& cfg, Rng& rng);

  Var operator()(const Var& f_c) const;
  void collect(ParamList& out, const std::string& prefix) const;

  BiMambaBlock scan;

 private:
  bool residual_ = false;
};

struct TrunkConfig {
  Index d_model = 256;
  Index n_local = 2;
  Index n_global = 1;
  LocalBlockConfig local;
  GlobalBlockConfig global;
};

// n_local local blocks, then the ordered concatenation, then n_global
// global blocks.
class FusionTrunk {
 public:
  FusionTrunk() = default;
  FusionTrunk(const TrunkConfig& cfg, Rng& rng);

  // [N x D], [N x D] -> [2N x D]
  Var operator()(const Var& f_h, const Var& f_p) const;

  // Histology-only path: the global blocks run over f_h alone.
  Var forward_unimodal(const Var& f_h) const;

  void collect(ParamList& out, const std::string& prefix) const;
  ParamList local_params() const;
  ParamList global_params() const;

  const TrunkConfig& config() const { return cfg_; }

  std::vector<LocalInteractionBlock> local_blocks;
  std::vector<GlobalEnhanceBlock> global_blocks;

 private:
  TrunkConfig cfg_;
};

}  // namespace survmamba
