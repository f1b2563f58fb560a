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

#include <random>
#include <string>
#include <vector>

#include "survmamba/autodiff.hpp"

namespace survmamba {

using Rng = std::mt19937_64;

struct NamedParam {
  std::string name;
  Var var;
};

using ParamList = std::vector<NamedParam>;

// Number of scalars across a parameter list.
Index param_scalars(const ParamList& params);

// Serialized size at 32-bit width.
inline std::size_t param_bytes(const ParamList& params)
{
  return static_cast<std::size_t>(param_scalars(params)) * 4;
}

Tensor uniform_tensor(Shape shape, double bound, Rng& rng);
Tensor normal_tensor(Shape shape, double stddev, Rng& rng);

// y = x W + b with W stored [in x out].
struct Linear {
  Var weight;
  Var bias;  // invalid when constructed without bias

  Linear() = default;
  Linear(Index in, Index out, bool with_bias, Rng& rng);

  Index in_features() const { return weight.rows(); }
  Index out_features() const { return weight.cols(); }

  Var operator()(const Var& x) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

struct LayerNorm {
  Var gamma;
  Var beta;

  LayerNorm() = default;
  explicit LayerNorm(Index width);

  Var operator()(const Var& x) const { return layer_norm(x, gamma, beta); }
  void collect(ParamList& out, const std::string& prefix) const;
};

// Linear -> SiLU -> Linear.
struct Mlp {
  Linear hidden;
  Linear output;

  Mlp() = default;
  Mlp(Index in, Index hidden_width, Index out, Rng& rng);

  Index in_features() const { return hidden.in_features(); }
  Index out_features() const { return output.out_features(); }

  Var operator()(const Var& x) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

}  // namespace survmamba
