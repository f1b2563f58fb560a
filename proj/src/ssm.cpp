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

#include "survmamba/ssm.hpp"

#include <cmath>
#include <vector>

namespace survmamba {

namespace {

void check_scan_shapes(const Tensor& u, const Tensor& delta, const Tensor& a, const Tensor& b,
                       const Tensor& cmat, const Tensor* d)
{
  const Index len = u.rows();
  const Index ch = u.cols();
  const Index st = a.cols();
  auto bad = [](const std::string& what) { fail(ErrorKind::Dimension, "selective_scan: " + what); };
  if (u.rank() != 2) bad("u must be [L x C]");
  if (!delta.same_shape(u)) bad("delta must match u");
  if (a.rank() != 2 || a.rows() != ch) bad("a must be [C x S]");
  if (b.rank() != 2 || b.rows() != len || b.cols() != st) bad("b must be [L x S]");
  if (cmat.rank() != 2 || cmat.rows() != len || cmat.cols() != st) bad("c must be [L x S]");
  if (d && d->size() != ch) bad("d must be [C]");
}

// d g / d a for g(delta, a) = expm1(delta a) / a.
double zoh_gain_da(double a, double delta)
{
  const double x = delta * a;
  if (std::abs(x) < 1e-4) return delta * delta * (0.5 + x / 3.0 + x * x / 8.0);
  return (x * std::exp(x) - std::expm1(x)) / (a * a);
}

// Reports the first non-finite output position.
void check_finite_rows(const Tensor& y)
{
  for (Index t = 0; t < y.rows(); ++t)
    if (!y.matrix().row(t).allFinite())
      fail(ErrorKind::Numeric, "selective_scan: non-finite output at position " + std::to_string(t));
}

}  // namespace

Var selective_scan(const Var& u, const Var& delta, const Var& a, const Var& b, const Var& cmat,
                   const Var& d)
{
  const bool has_skip = d.valid();
  check_scan_shapes(u.value(), delta.value(), a.value(), b.value(), cmat.value(),
                    has_skip ? &d.value() : nullptr);
  if ((delta.value().array() <= 0.0).any())
    fail(ErrorKind::Domain, "selective_scan: delta must be positive");

  const Index len = u.rows();
  const Index ch = u.cols();
  const Index st = a.cols();
  const bool rec = recording({&u, &delta, &a, &b, &cmat, &d});

  const auto um = u.value().matrix();
  const auto dm = delta.value().matrix();
  const auto am = a.value().matrix();
  const auto bm = b.value().matrix();
  const auto cm = cmat.value().matrix();

  // States are saved per position when a backward pass will need them.
  std::vector<double> states(rec ? static_cast<std::size_t>(len * ch * st) : 0);
  RowMatrix<double> h = RowMatrix<double>::Zero(ch, st);
  Tensor y({len, ch});
  auto ym = y.matrix();
  for (Index t = 0; t < len; ++t) {
    for (Index c = 0; c < ch; ++c) {
      const double dt = dm(t, c);
      const double ut = um(t, c);
      double acc = 0.0;
      for (Index s = 0; s < st; ++s) {
        const double x = dt * am(c, s);
        const double gain = std::abs(x) < kZohLimit ? dt : std::expm1(x) / am(c, s);
        const double hs = std::exp(x) * h(c, s) + gain * bm(t, s) * ut;
        h(c, s) = hs;
        acc += cm(t, s) * hs;
      }
      ym(t, c) = acc;
    }
    if (rec) std::copy(h.data(), h.data() + ch * st, states.data() + t * ch * st);
  }
  if (has_skip) ym.array() += um.array().rowwise() * d.value().matrix().row(0).array();
  check_finite_rows(y);

  return make_result(std::move(y), {&u, &delta, &a, &b, &cmat, &d},
                     [u, delta, a, b, cmat, d, states = std::move(states)](const Tensor& g) {
    const Index len = u.rows();
    const Index ch = u.cols();
    const Index st = a.cols();
    const auto um = u.value().matrix();
    const auto dm = delta.value().matrix();
    const auto am = a.value().matrix();
    const auto bm = b.value().matrix();
    const auto cm = cmat.value().matrix();
    const auto gm = g.matrix();

    Tensor gu(u.shape()), gdelta(delta.shape()), ga(a.shape()), gb(b.shape()), gc(cmat.shape());
    auto gum = gu.matrix();
    auto gdm = gdelta.matrix();
    auto gam = ga.matrix();
    auto gbm = gb.matrix();
    auto gcm = gc.matrix();

    // gh holds dL/dh_t while walking t downward.
    RowMatrix<double> gh = RowMatrix<double>::Zero(ch, st);
    for (Index t = len - 1; t >= 0; --t) {
      const double* ht = states.data() + t * ch * st;
      const double* hprev = t > 0 ? states.data() + (t - 1) * ch * st : nullptr;
      for (Index c = 0; c < ch; ++c) {
        const double dt = dm(t, c);
        const double ut = um(t, c);
        const double gyt = gm(t, c);
        double gu_acc = 0.0;
        double gdt_acc = 0.0;
        for (Index s = 0; s < st; ++s) {
          const double hts = ht[c * st + s];
          gcm(t, s) += gyt * hts;
          const double ghs = gh(c, s) + gyt * cm(t, s);

          const double av = am(c, s);
          const double x = dt * av;
          const double decay = std::exp(x);
          const double gain = std::abs(x) < kZohLimit ? dt : std::expm1(x) / av;
          const double hp = hprev ? hprev[c * st + s] : 0.0;

          const double g_decay = ghs * hp;
          const double g_gain = ghs * bm(t, s) * ut;
          gu_acc += ghs * gain * bm(t, s);
          gbm(t, s) += ghs * gain * ut;
          gdt_acc += g_decay * av * decay + g_gain * decay;
          gam(c, s) += g_decay * dt * decay + g_gain * zoh_gain_da(av, dt);
          gh(c, s) = ghs * decay;
        }
        gum(t, c) += gu_acc;
        gdm(t, c) += gdt_acc;
      }
    }
    if (d.valid()) {
      gum.array() += gm.array().rowwise() * d.value().matrix().row(0).array();
      if (d.requires_grad()) {
        Tensor gd(d.shape());
        gd.matrix() = (gm.array() * um.array()).colwise().sum();
        accumulate_grad(d, std::move(gd));
      }
    }
    accumulate_grad(u, std::move(gu));
    accumulate_grad(delta, std::move(gdelta));
    accumulate_grad(a, std::move(ga));
    accumulate_grad(b, std::move(gb));
    accumulate_grad(cmat, std::move(gc));
  }, "selective_scan");
}

Tensor selective_scan_chunked(const Tensor& u, const Tensor& delta, const Tensor& a,
                              const Tensor& b, const Tensor& cmat, const Tensor* d, Index chunk)
{
  check_scan_shapes(u, delta, a, b, cmat, d);
  if (chunk <= 0) fail(ErrorKind::Domain, "selective_scan_chunked: chunk must be positive");
  const Index len = u.rows();
  const Index ch = u.cols();
  const Index st = a.cols();
  const auto um = u.matrix();
  const auto dm = delta.matrix();
  const auto am = a.matrix();
  const auto bm = b.matrix();
  const auto cm = cmat.matrix();

  Tensor y({len, ch});
  auto ym = y.matrix();
  RowMatrix<double> carry = RowMatrix<double>::Zero(ch, st);
  RowMatrix<double> local(ch, st);
  RowMatrix<double> decay(ch, st);
  for (Index start = 0; start < len; start += chunk) {
    const Index stop = std::min(len, start + chunk);
    local.setZero();
    decay.setOnes();
    for (Index t = start; t < stop; ++t) {
      for (Index c = 0; c < ch; ++c) {
        const double dt = dm(t, c);
        double acc = 0.0;
        for (Index s = 0; s < st; ++s) {
          const double x = dt * am(c, s);
          const double gain = std::abs(x) < kZohLimit ? dt : std::expm1(x) / am(c, s);
          const double ax = std::exp(x);
          local(c, s) = ax * local(c, s) + gain * bm(t, s) * um(t, c);
          decay(c, s) *= ax;
          acc += cm(t, s) * (local(c, s) + decay(c, s) * carry(c, s));
        }
        ym(t, c) = acc;
      }
    }
    carry = local.array() + decay.array() * carry.array();
  }
  if (d) ym.array() += um.array().rowwise() * d->matrix().row(0).array();
  check_finite_rows(y);
  return y;
}

///////////////////////////////////////////
// SelectiveSsm
///////////////////////////////////////////

namespace {

// softplus^-1 of dt sampled log-uniformly in [dt_min, dt_max].
Tensor init_dt_bias(Index channels, const SsmConfig& cfg, Rng& rng)
{
  std::uniform_real_distribution<double> dist(std::log(cfg.dt_min), std::log(cfg.dt_max));
  Tensor bias({channels});
  for (Index c = 0; c < channels; ++c) {
    const double dt = std::exp(dist(rng));
    bias[c] = dt + std::log(-std::expm1(-dt));
  }
  return bias;
}

}  // namespace

SelectiveSsm::SelectiveSsm(Index channels, const SsmConfig& cfg, Rng& rng)
  : channels_(channels), cfg_(cfg)
{
  if (channels <= 0 || cfg.state <= 0) fail(ErrorKind::Config, "SelectiveSsm: empty dimensions");
  if (!(cfg.dt_min > 0 && cfg.dt_min <= cfg.dt_max))
    fail(ErrorKind::Config, "SelectiveSsm: need 0 < dt_min <= dt_max");
  const Index st = cfg.state;
  if (cfg_.selective) {
    const Index rank = cfg.dt_rank > 0 ? cfg.dt_rank : (channels + 15) / 16;
    cfg_.dt_rank = rank;
    dt_in = Linear(channels, rank, false, rng);
    dt_proj = Linear(rank, channels, false, rng);
    dt_proj.bias = parameter(init_dt_bias(channels, cfg, rng));
    b_proj = Linear(channels, st, false, rng);
    c_proj = Linear(channels, st, false, rng);
  } else {
    dt_bias = parameter(init_dt_bias(channels, cfg, rng));
    b_const = parameter(uniform_tensor({st}, 1.0, rng));
    c_const = parameter(uniform_tensor({st}, 1.0, rng));
  }
  Tensor alog({channels, st});
  for (Index c = 0; c < channels; ++c)
    for (Index s = 0; s < st; ++s) alog(c, s) = std::log(double(s + 1));
  a_log = parameter(std::move(alog));
  if (cfg_.skip) d_skip = parameter(Tensor::constant({channels}, 1.0));
}

Var SelectiveSsm::a_matrix() const { return neg(exp(a_log)); }

Var SelectiveSsm::delta(const Var& u) const
{
  if (cfg_.selective) return softplus(dt_proj(dt_in(u)));
  return repeat_rows(softplus(dt_bias), u.rows());
}

Var SelectiveSsm::operator()(const Var& u) const
{
  if (u.value().rank() != 2 || u.cols() != channels_)
    fail(ErrorKind::Dimension, "SelectiveSsm: expected [L x " + std::to_string(channels_) +
                                   "], got " + shape_str(u.shape()));
  Var b = cfg_.selective ? b_proj(u) : repeat_rows(b_const, u.rows());
  Var c = cfg_.selective ? c_proj(u) : repeat_rows(c_const, u.rows());
  return selective_scan(u, delta(u), a_matrix(), b, c, d_skip);
}

Tensor SelectiveSsm::forward_convolutional(const Tensor& u) const
{
  if (cfg_.selective)
    fail(ErrorKind::Contract, "forward_convolutional requires a non-selective SSM");
  if (u.rank() != 2 || u.cols() != channels_)
    fail(ErrorKind::Dimension, "forward_convolutional: input width mismatch");
  const Index len = u.rows();
  const Vec<double> b = b_const.value().storage();
  const Vec<double> c = c_const.value().storage();
  Tensor y({len, channels_});
  for (Index ch = 0; ch < channels_; ++ch) {
    const double dt = softplus_scalar(dt_bias.value()[ch]);
    const Vec<double> a = -a_log.value().matrix().row(ch).transpose().array().exp();
    const auto dssm = discretize_zoh<double>(a, b, dt);
    const Vec<double> x = u.matrix().col(ch);
    Vec<double> out = build_kernel_and_convolve(dssm, c, x);
    if (d_skip.valid()) out += d_skip.value()[ch] * x;
    y.matrix().col(ch) = out;
  }
  return y;
}

void SelectiveSsm::collect(ParamList& out, const std::string& prefix) const
{
  if (cfg_.selective) {
    dt_in.collect(out, prefix + ".dt_in");
    dt_proj.collect(out, prefix + ".dt_proj");
    b_proj.collect(out, prefix + ".b_proj");
    c_proj.collect(out, prefix + ".c_proj");
  } else {
    out.push_back({prefix + ".dt_bias", dt_bias});
    out.push_back({prefix + ".b", b_const});
    out.push_back({prefix + ".c", c_const});
  }
  out.push_back({prefix + ".a_log", a_log});
  if (d_skip.valid()) out.push_back({prefix + ".d", d_skip});
}

///////////////////////////////////////////
// MambaBlock / BiMambaBlock
///////////////////////////////////////////

MambaBlock::MambaBlock(Index d_model, const MambaConfig& cfg, Rng& rng)
{
  if (cfg.expand <= 0 || cfg.conv_width <= 0) fail(ErrorKind::Config, "MambaBlock: bad config");
  const Index inner = cfg.expand * d_model;
  in_value = Linear(d_model, inner, true, rng);
  in_gate = Linear(d_model, inner, true, rng);
  const double bound = 1.0 / std::sqrt(double(cfg.conv_width));
  conv_kernel = parameter(uniform_tensor({cfg.conv_width, inner}, bound, rng));
  conv_bias = parameter(Tensor::zeros({inner}));
  ssm = SelectiveSsm(inner, cfg.ssm, rng);
  out_proj = Linear(inner, d_model, false, rng);
}

Var MambaBlock::operator()(const Var& f) const
{
  Var v = in_value(f);
  Var z = in_gate(f);
  Var xs = silu(add_bias(depthwise_conv1d(v, conv_kernel), conv_bias));
  return out_proj(mul(ssm(xs), silu(z)));
}

void MambaBlock::collect(ParamList& out, const std::string& prefix) const
{
  in_value.collect(out, prefix + ".in_value");
  in_gate.collect(out, prefix + ".in_gate");
  out.push_back({prefix + ".conv.kernel", conv_kernel});
  out.push_back({prefix + ".conv.bias", conv_bias});
  ssm.collect(out, prefix + ".ssm");
  out_proj.collect(out, prefix + ".out_proj");
}

BiMambaBlock::BiMambaBlock(Index d_model, const MambaConfig& cfg, bool tie_weights, Rng& rng)
  : forward_dir(d_model, cfg, rng), tied_(tie_weights)
{
  if (!tied_) backward_dir = MambaBlock(d_model, cfg, rng);
}

Var BiMambaBlock::operator()(const Var& f) const
{
  const MambaBlock& back = tied_ ? forward_dir : backward_dir;
  return add(forward_dir(f), reverse_rows(back(reverse_rows(f))));
}

void BiMambaBlock::collect(ParamList& out, const std::string& prefix) const
{
  forward_dir.collect(out, prefix + ".forward");
  if (!tied_) backward_dir.collect(out, prefix + ".backward");
}

}  // namespace survmamba
