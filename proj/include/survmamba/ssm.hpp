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

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

///////////////////////////////////////////
// Linear time-invariant SSM with diagonal A
///////////////////////////////////////////

// h'(t) = A h(t) + B x(t), y(t) = C h(t) for one input channel, A diagonal.
template <typename Scalar>
struct ContinuousSsm {
  Vec<Scalar> a;  // strictly negative
  Vec<Scalar> b;
  Vec<Scalar> c;
  Scalar delta;   // strictly positive
};

template <typename Scalar>
struct DiscreteSsm {
  Vec<Scalar> a_bar;
  Vec<Scalar> b_bar;
};

// Below this |delta * a| the zero-order-hold input gain uses its limit delta.
inline constexpr double kZohLimit = 1e-8;

// Per-entry ZOH: a_bar = exp(delta a), b_bar = (delta a)^-1 (exp(delta a) - 1) delta b.
template <typename Scalar>
Scalar zoh_input_gain(Scalar a, Scalar delta)
{
  using std::abs;
  using std::expm1;
  const Scalar x = delta * a;
  if (abs(x) < Scalar(kZohLimit)) return delta;
  return expm1(x) / a;
}

template <typename Scalar>
DiscreteSsm<Scalar> discretize_zoh(const Vec<Scalar>& a, const Vec<Scalar>& b, Scalar delta)
{
  using std::exp;
  if (!(delta > Scalar(0))) fail(ErrorKind::Domain, "discretize_zoh: delta must be positive");
  if (a.size() != b.size()) fail(ErrorKind::Dimension, "discretize_zoh: A and B sizes differ");
  DiscreteSsm<Scalar> d{Vec<Scalar>(a.size()), Vec<Scalar>(a.size())};
  for (Index s = 0; s < a.size(); ++s) {
    d.a_bar[s] = exp(delta * a[s]);
    d.b_bar[s] = zoh_input_gain(a[s], delta) * b[s];
  }
  return d;
}

template <typename Scalar>
DiscreteSsm<Scalar> discretize_zoh(const ContinuousSsm<Scalar>& ssm)
{
  return discretize_zoh(ssm.a, ssm.b, ssm.delta);
}

// h_t = a_bar h_{t-1} + b_bar x_t, y_t = c . h_t, h_0 = 0.
template <typename Scalar>
Vec<Scalar> scan_recurrent(const DiscreteSsm<Scalar>& dssm, const Vec<Scalar>& c,
                           const Vec<Scalar>& x)
{
  if (x.size() == 0) fail(ErrorKind::Domain, "scan_recurrent: empty sequence");
  if (c.size() != dssm.a_bar.size()) fail(ErrorKind::Dimension, "scan_recurrent: C size mismatch");
  Vec<Scalar> h = Vec<Scalar>::Zero(c.size());
  Vec<Scalar> y(x.size());
  for (Index t = 0; t < x.size(); ++t) {
    h = dssm.a_bar.cwiseProduct(h) + dssm.b_bar * x[t];
    y[t] = c.dot(h);
  }
  return y;
}

// K = (c b_bar, c a_bar b_bar, ..., c a_bar^{L-1} b_bar).
template <typename Scalar>
Vec<Scalar> ssm_kernel(const DiscreteSsm<Scalar>& dssm, const Vec<Scalar>& c, Index length)
{
  Vec<Scalar> k(length);
  Vec<Scalar> power = dssm.b_bar;
  for (Index j = 0; j < length; ++j) {
    k[j] = c.dot(power);
    power = dssm.a_bar.cwiseProduct(power);
  }
  return k;
}

// y_t = sum_{j <= t} k_j x_{t-j}.
template <typename Scalar>
Vec<Scalar> causal_convolve(const Vec<Scalar>& x, const Vec<Scalar>& k)
{
  Vec<Scalar> y = Vec<Scalar>::Zero(x.size());
  for (Index t = 0; t < x.size(); ++t) {
    const Index taps = std::min<Index>(t + 1, k.size());
    for (Index j = 0; j < taps; ++j) y[t] += k[j] * x[t - j];
  }
  return y;
}

template <typename Scalar>
Vec<Scalar> build_kernel_and_convolve(const DiscreteSsm<Scalar>& dssm, const Vec<Scalar>& c,
                                      const Vec<Scalar>& x)
{
  if (c.size() != dssm.a_bar.size())
    fail(ErrorKind::Dimension, "build_kernel_and_convolve: C size mismatch");
  return causal_convolve(x, ssm_kernel(dssm, c, x.size()));
}

///////////////////////////////////////////
// Selective scan
///////////////////////////////////////////

// Time-varying diagonal scan over C channels with state size S:
//   h_t[c,s] = exp(delta[t,c] a[c,s]) h_{t-1}[c,s] + g(delta[t,c], a[c,s]) b[t,s] u[t,c]
//   y[t,c]   = sum_s cmat[t,s] h_t[c,s] + d[c] u[t,c]
// with g the ZOH input gain. u, delta: [L x C]; a: [C x S]; b, cmat: [L x S];
// d: [C] or an invalid Var for no skip term. Differentiable in all inputs.
Var selective_scan(const Var& u, const Var& delta, const Var& a, const Var& b, const Var& cmat,
                   const Var& d);

// Forward-only chunked evaluation of selective_scan. Each chunk is scanned
// from a zero state alongside its cumulative decay, then corrected by the
// carried-in state. Agrees with the sequential scan up to reassociation.
Tensor selective_scan_chunked(const Tensor& u, const Tensor& delta, const Tensor& a,
                              const Tensor& b, const Tensor& cmat, const Tensor* d, Index chunk);

///////////////////////////////////////////
// Blocks
///////////////////////////////////////////

struct SsmConfig {
  Index state = 16;
  bool selective = true;
  bool skip = true;
  Index dt_rank = 0;  // 0 selects ceil(channels / 16)
  double dt_min = 1e-3;
  double dt_max = 1e-1;
};

// Diagonal SSM over `channels` inputs. Selective mode derives delta, B and C
// from each input row; otherwise they are learned constants.
class SelectiveSsm {
 public:
  SelectiveSsm() = default;
  SelectiveSsm(Index channels, const SsmConfig& cfg, Rng& rng);

  Var operator()(const Var& u) const;

  // Per-position discretization inputs, exposed for tests and diagnostics.
  Var delta(const Var& u) const;
  Var a_matrix() const;

  // Kernel-convolution evaluation, only valid in non-selective mode.
  Tensor forward_convolutional(const Tensor& u) const;

  Index channels() const { return channels_; }
  const SsmConfig& config() const { return cfg_; }
  void collect(ParamList& out, const std::string& prefix) const;

  // Selective projections.
  Linear dt_in;    // C -> R
  Linear dt_proj;  // R -> C, bias is the delta offset
  Linear b_proj;   // C -> S
  Linear c_proj;   // C -> S
  // Non-selective constants.
  Var dt_bias;  // [C]
  Var b_const;  // [S]
  Var c_const;  // [S]

  Var a_log;  // [C x S], a = -exp(a_log)
  Var d_skip; // [C]

 private:
  Index channels_ = 0;
  SsmConfig cfg_;
};

struct MambaConfig {
  Index expand = 2;
  Index conv_width = 4;
  SsmConfig ssm;
};

// out_proj( ssm(silu(conv(v))) * silu(z) ), v and z linear in the input.
class MambaBlock {
 public:
  MambaBlock() = default;
  MambaBlock(Index d_model, const MambaConfig& cfg, Rng& rng);

  Var operator()(const Var& f) const;
  void collect(ParamList& out, const std::string& prefix) const;

  Linear in_value;  // D -> E*D
  Linear in_gate;   // D -> E*D
  Var conv_kernel;  // [W x E*D]
  Var conv_bias;    // [E*D]
  SelectiveSsm ssm;
  Linear out_proj;  // E*D -> D
};

// Forward scan plus a scan over the reversed sequence, summed.
class BiMambaBlock {
 public:
  BiMambaBlock() = default;
  BiMambaBlock(Index d_model, const MambaConfig& cfg, bool tie_weights, Rng& rng);

  Var operator()(const Var& f) const;
  void collect(ParamList& out, const std::string& prefix) const;

  bool tied() const { return tied_; }

  MambaBlock forward_dir;
  MambaBlock backward_dir;  // unused when tied

 private:
  bool tied_ = false;
};

}  // namespace survmamba
