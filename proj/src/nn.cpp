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

#include "survmamba/nn.hpp"

#include <cmath>

namespace survmamba {

Index param_scalars(const ParamList& params)
{
  Index n = 0;
  for (const auto& p : params) n += p.var.size();
  return n;
}

Tensor uniform_tensor(Shape shape, double bound, Rng& rng)
{
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

Tensor normal_tensor(Shape shape, double stddev, Rng& rng)
{
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (Index i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

Linear::Linear(Index in, Index out, bool with_bias, Rng& rng)
{
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight = parameter(uniform_tensor({in, out}, bound, rng));
  if (with_bias) bias = parameter(uniform_tensor({out}, bound, rng));
}

Var Linear::operator()(const Var& x) const
{
  Var y = matmul(x, weight);
  return bias.valid() ? add_bias(y, bias) : y;
}

void Linear::collect(ParamList& out, const std::string& prefix) const
{
  out.push_back({prefix + ".weight", weight});
  if (bias.valid()) out.push_back({prefix + ".bias", bias});
}

LayerNorm::LayerNorm(Index width)
  : gamma(parameter(Tensor::constant({width}, 1.0))), beta(parameter(Tensor::zeros({width})))
{
}

void LayerNorm::collect(ParamList& out, const std::string& prefix) const
{
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

Mlp::Mlp(Index in, Index hidden_width, Index out, Rng& rng)
  : hidden(in, hidden_width, true, rng), output(hidden_width, out, true, rng)
{
}

Var Mlp::operator()(const Var& x) const { return output(silu(hidden(x))); }

void Mlp::collect(ParamList& out, const std::string& prefix) const
{
  hidden.collect(out, prefix + ".hidden");
  output.collect(out, prefix + ".output");
}

}  // namespace survmamba
