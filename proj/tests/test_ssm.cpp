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

#include <doctest.h>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "survmamba/ssm.hpp"

using namespace survmamba;
using namespace survmamba::testing;

TEST_CASE("discretize_zoh examples")
{
  const auto lim = discretize_zoh<double>(Vec<double>::Constant(1, 0.0), Vec<double>::Constant(1, 1.0), 0.1);
  CHECK(lim.a_bar[0] == 1.0);
  CHECK(lim.b_bar[0] == doctest::Approx(0.1).epsilon(1e-15));

  const auto d = discretize_zoh<double>(Vec<double>::Constant(1, -1.0), Vec<double>::Constant(1, 1.0), 0.1);
  CHECK(d.a_bar[0] == doctest::Approx(0.904837418035960).epsilon(1e-14));
  CHECK(d.b_bar[0] == doctest::Approx(0.0951625819640404).epsilon(1e-14));

  const auto e = discretize_zoh<double>(Vec<double>::Constant(1, -2.0), Vec<double>::Constant(1, 3.0), 0.5);
  const auto [ab, bb] = zoh_oracle(-2.0L, 3.0L, 0.5L);
  CHECK(std::abs(e.a_bar[0] - double(ab)) < 1e-12);
  CHECK(std::abs(e.b_bar[0] - double(bb)) < 1e-12);

  CHECK_THROWS_AS(discretize_zoh<double>(Vec<double>::Constant(1, -1.0), Vec<double>::Constant(1, 1.0), 0.0),
                  Error);
}

TEST_CASE("discretize_zoh matches the closed form on random draws")
{
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const auto draw = random_zoh_draw(rng, i);
    const auto d = discretize_zoh<double>(Vec<double>::Constant(1, draw.a), Vec<double>::Constant(1, draw.b),
                                          draw.delta);
    const auto [ab, bb] = zoh_oracle<long double>(draw.a, draw.b, draw.delta);
    CHECK(std::abs(d.a_bar[0] - double(ab)) < 1e-12);
    CHECK(std::abs(d.b_bar[0] - double(bb)) < 1e-12);
    CHECK(d.a_bar[0] > 0.0);
    CHECK(d.a_bar[0] <= 1.0);
  }
}

TEST_CASE("discretize_zoh approaches first order as delta shrinks")
{
  const double a = -1.7, b = 0.8;
  for (double delta : {1e-3, 1e-6}) {
    const auto d = discretize_zoh<double>(Vec<double>::Constant(1, a), Vec<double>::Constant(1, b), delta);
    CHECK(std::abs(d.a_bar[0] - (1 + delta * a)) <= 1.01 * delta * delta * a * a / 2 + 1e-16);
    CHECK(std::abs(d.b_bar[0] - delta * b) <= 1.01 * delta * delta * std::abs(a * b) / 2 + 1e-18);
  }
}

TEST_CASE("scan_recurrent examples")
{
  DiscreteSsm<double> half{Vec<double>::Constant(1, 0.5), Vec<double>::Constant(1, 1.0)};
  const Vec<double> one = Vec<double>::Constant(1, 1.0);
  const Vec<double> y = scan_recurrent(half, one, Vec<double>(Vec<double>::Constant(3, 1.0)));
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 1.5);
  CHECK(y[2] == 1.75);
  CHECK(scan_recurrent(half, one, Vec<double>(Vec<double>::Zero(5))).isZero(0.0));
  DiscreteSsm<double> single{Vec<double>::Constant(2, 0.3), Vec<double>(Vec<double>::LinSpaced(2, 1.0, 2.0))};
  const Vec<double> c = Vec<double>::LinSpaced(2, -1.0, 0.5);
  CHECK(scan_recurrent(single, c, Vec<double>(Vec<double>::Constant(1, 2.0)))[0] == doctest::Approx(c.dot(single.b_bar) * 2.0));
  CHECK_THROWS_AS(scan_recurrent(half, one, Vec<double>()), Error);
}

TEST_CASE("kernel form examples")
{
  DiscreteSsm<double> half{Vec<double>::Constant(1, 0.5), Vec<double>::Constant(1, 1.0)};
  const Vec<double> one = Vec<double>::Constant(1, 1.0);
  const Vec<double> k = ssm_kernel(half, one, 3);
  CHECK(k[0] == 1.0);
  CHECK(k[1] == 0.5);
  CHECK(k[2] == 0.25);
  const Vec<double> y = build_kernel_and_convolve(half, one, Vec<double>(Vec<double>::Constant(3, 1.0)));
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 1.5);
  CHECK(y[2] == 1.75);

  DiscreteSsm<double> memoryless{Vec<double>::Constant(2, 0.0), Vec<double>::Constant(2, 1.5)};
  const Vec<double> c = Vec<double>::Constant(2, 2.0);
  const Vec<double> km = ssm_kernel(memoryless, c, 4);
  CHECK(km[0] == 6.0);
  CHECK(km.tail(3).isZero(0.0));
  Rng rng(2);
  const Vec<double> x = uniform({6}, rng).storage();
  CHECK((build_kernel_and_convolve(memoryless, c, x) - 6.0 * x).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("recurrent and convolutional forms agree")
{
  Rng rng(12);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto inst = random_lti_instance(rng, i);
    const auto d = discretize_zoh(inst.ssm);
    const Vec<double> yr = scan_recurrent(d, inst.ssm.c, inst.x);
    const Vec<double> yc = build_kernel_and_convolve(d, inst.ssm.c, inst.x);
    worst = std::max(worst, (yr - yc).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("selective_scan matches a per-step loop")
{
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    const auto inst = random_scan_instance(rng, 8, 3, 4);
    const Tensor y = selective_scan(constant(inst.u), constant(inst.delta), constant(inst.a), constant(inst.b),
                                    constant(inst.c), constant(inst.d))
                         .value();
    const Tensor want = naive_selective_scan(inst);
    for (Index i = 0; i < y.size(); ++i) CHECK(std::abs(y[i] - want[i]) < 1e-10);

    const Tensor no_skip =
        selective_scan(constant(inst.u), constant(inst.delta), constant(inst.a), constant(inst.b),
                       constant(inst.c), Var())
            .value();
    const Tensor want_no_skip = naive_selective_scan(inst, false);
    for (Index i = 0; i < y.size(); ++i) CHECK(std::abs(no_skip[i] - want_no_skip[i]) < 1e-10);
  }
}

TEST_CASE("selective_scan with constant inputs reduces to the fixed recurrence")
{
  Rng rng(13);
  const Index len = 12, ch = 2, st = 3;
  auto inst = random_scan_instance(rng, len, ch, st);
  for (Index t = 0; t < len; ++t) {
    for (Index c = 0; c < ch; ++c) inst.delta(t, c) = inst.delta(0, c);
    for (Index s = 0; s < st; ++s) {
      inst.b(t, s) = inst.b(0, s);
      inst.c(t, s) = inst.c(0, s);
    }
  }
  const Tensor y = selective_scan(constant(inst.u), constant(inst.delta), constant(inst.a), constant(inst.b),
                                  constant(inst.c), Var())
                       .value();
  for (Index c = 0; c < ch; ++c) {
    const Vec<double> a = inst.a.matrix().row(c).transpose();
    const Vec<double> b = inst.b.matrix().row(0).transpose();
    const Vec<double> cv = inst.c.matrix().row(0).transpose();
    const auto d = discretize_zoh<double>(a, b, inst.delta(0, c));
    const Vec<double> ref = scan_recurrent(d, cv, Vec<double>(inst.u.matrix().col(c)));
    for (Index t = 0; t < len; ++t) CHECK(std::abs(y(t, c) - ref[t]) < 1e-12);
  }
}

TEST_CASE("selective_scan is causal")
{
  Rng rng(14);
  SsmConfig cfg;
  cfg.state = 4;
  const SelectiveSsm ssm(5, cfg, rng);
  const Tensor u = uniform({10, 5}, rng);
  const Tensor base = ssm(constant(u)).value();
  for (Index t = 0; t < 10; ++t) {
    Tensor v = u;
    v(t, 2) += 0.7;
    const Tensor out = ssm(constant(v)).value();
    for (Index s = 0; s < t; ++s)
      for (Index c = 0; c < 5; ++c) CHECK(out(s, c) == base(s, c));
    CHECK(out(t, 2) != base(t, 2));
  }
}

TEST_CASE("chunked scan agrees with the sequential scan")
{
  Rng rng(15);
  const auto inst = random_scan_instance(rng, 300, 4, 8);
  const Tensor ref = selective_scan(constant(inst.u), constant(inst.delta), constant(inst.a), constant(inst.b),
                                    constant(inst.c), constant(inst.d))
                         .value();
  for (Index chunk : {1, 7, 64, 300, 1000}) {
    const Tensor y = selective_scan_chunked(inst.u, inst.delta, inst.a, inst.b, inst.c, &inst.d, chunk);
    double worst = 0.0;
    for (Index i = 0; i < y.size(); ++i) worst = std::max(worst, std::abs(y[i] - ref[i]));
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("selective_scan state stays bounded over long sequences")
{
  Rng rng(16);
  const Index len = 100000, ch = 2, st = 4;
  auto inst = random_scan_instance(rng, len, ch, st);
  const Tensor y = selective_scan(constant(inst.u), constant(inst.delta), constant(inst.a), constant(inst.b),
                                  constant(inst.c), Var())
                       .value();
  CHECK(y.all_finite());
  // |h| <= max|B u| * max gain / (1 - max a_bar) per state entry.
  const double max_a = inst.a.storage().maxCoeff();
  const double min_dt = inst.delta.storage().minCoeff();
  const double max_dt = inst.delta.storage().maxCoeff();
  const double bound_h = inst.b.storage().cwiseAbs().maxCoeff() * inst.u.storage().cwiseAbs().maxCoeff() * max_dt /
                         (1.0 - std::exp(min_dt * max_a));
  const double bound_y = double(st) * inst.c.storage().cwiseAbs().maxCoeff() * bound_h;
  CHECK(y.storage().cwiseAbs().maxCoeff() <= bound_y);
}

TEST_CASE("selective_scan rejects bad inputs")
{
  Rng rng(17);
  auto inst = random_scan_instance(rng, 4, 2, 3);
  inst.delta(1, 1) = -0.1;
  CHECK_THROWS_AS(selective_scan(constant(inst.u), constant(inst.delta), constant(inst.a), constant(inst.b),
                                 constant(inst.c), Var()),
                  Error);
  inst.delta(1, 1) = 0.1;
  inst.u(2, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    (void)selective_scan(constant(inst.u), constant(inst.delta), constant(inst.a), constant(inst.b),
                         constant(inst.c), Var());
    FAIL("expected a numeric error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numeric);
    CHECK(std::string(e.what()).find("position 2") != std::string::npos);
  }
}

TEST_CASE("selective_scan gradients")
{
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    const auto inst = random_scan_instance(rng, 6, 3, 4);
    const Var u = parameter(inst.u), delta = parameter(inst.delta), a = parameter(inst.a);
    const Var b = parameter(inst.b), c = parameter(inst.c), d = parameter(inst.d);
    const auto r = grad_check([&] { return weighted_sum(selective_scan(u, delta, a, b, c, d)); },
                              as_params({u, delta, a, b, c, d}));
    CHECK_MESSAGE(r.max_rel_err < 1e-4, r.worst);
  }
}

TEST_CASE("non-selective SSM: kernel path matches the scan path")
{
  Rng rng(18);
  SsmConfig cfg;
  cfg.selective = false;
  cfg.state = 6;
  const SelectiveSsm ssm(3, cfg, rng);
  const Tensor u = uniform({40, 3}, rng);
  const Tensor scan = ssm(constant(u)).value();
  const Tensor conv = ssm.forward_convolutional(u);
  for (Index i = 0; i < scan.size(); ++i) CHECK(std::abs(scan[i] - conv[i]) < 1e-10);

  SsmConfig sel;
  const SelectiveSsm selective(3, sel, rng);
  CHECK_THROWS_AS(selective.forward_convolutional(u), Error);
}

TEST_CASE("SSM parameter initialization")
{
  Rng rng(19);
  const SelectiveSsm ssm(8, SsmConfig{}, rng);
  const Tensor a = ssm.a_matrix().value();
  CHECK((a.storage().array() < 0).all());
  CHECK(a(3, 0) == doctest::Approx(-1.0));
  CHECK(a(3, 15) == doctest::Approx(-16.0));
  const Tensor dt = ssm.delta(constant(Tensor::zeros({2, 8}))).value();
  for (Index i = 0; i < dt.size(); ++i) {
    CHECK(dt[i] >= 1e-3 * (1 - 1e-9));
    CHECK(dt[i] <= 1e-1 * (1 + 1e-9));
  }
}

TEST_CASE("mamba block: zero gate annihilates the output")
{
  Rng rng(20);
  MambaBlock block(4, MambaConfig{}, rng);
  block.in_gate.weight.mutable_value().storage().setZero();
  block.in_gate.bias.mutable_value().storage().setZero();
  const Tensor y = block(constant(uniform({7, 4}, rng))).value();
  CHECK(y.storage().isZero(0.0));
}

TEST_CASE("mamba block: degenerate configuration reproduces the fixed recurrence")
{
  Rng rng(21);
  const Index dm = 3;
  MambaConfig cfg;
  cfg.expand = 1;
  cfg.conv_width = 1;
  cfg.ssm.selective = false;
  cfg.ssm.state = 5;
  MambaBlock block(dm, cfg, rng);
  block.in_value.weight.mutable_value().matrix().setIdentity();
  block.in_value.bias.mutable_value().storage().setZero();
  block.conv_kernel.mutable_value().storage().setOnes();
  block.in_gate.weight.mutable_value().storage().setZero();
  block.in_gate.bias.mutable_value().storage().setOnes();
  block.out_proj.weight.mutable_value().matrix().setIdentity();
  block.conv_bias.mutable_value().storage().setZero();

  const Tensor f = uniform({9, dm}, rng);
  const Tensor y = block(constant(f)).value();
  const double gate = silu_scalar(1.0);
  const SelectiveSsm& ssm = block.ssm;
  const Vec<double> b = ssm.b_const.value().storage();
  const Vec<double> c = ssm.c_const.value().storage();
  for (Index ch = 0; ch < dm; ++ch) {
    const Vec<double> a = -ssm.a_log.value().matrix().row(ch).transpose().array().exp();
    const auto d = discretize_zoh<double>(a, b, softplus_scalar(ssm.dt_bias.value()[ch]));
    Vec<double> x(9);
    for (Index t = 0; t < 9; ++t) x[t] = silu_scalar(f(t, ch));
    const Vec<double> ref = scan_recurrent(d, c, x) + ssm.d_skip.value()[ch] * x;
    for (Index t = 0; t < 9; ++t) CHECK(std::abs(y(t, ch) - gate * ref[t]) < 1e-12);
  }
}

TEST_CASE("mamba block output shape")
{
  Rng rng(22);
  const MambaBlock block(6, MambaConfig{2, 4, SsmConfig{4}}, rng);
  for (Index len : {1, 2, 17}) CHECK(block(constant(uniform({len, 6}, rng))).shape() == Shape{len, 6});
}

TEST_CASE("mamba block gradients")
{
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    MambaConfig cfg;
    cfg.ssm.state = 4;
    const MambaBlock block(4, cfg, rng);
    const Var f = parameter(uniform({6, 4}, rng));
    ParamList params;
    block.collect(params, "mamba");
    params.push_back({"f", f});
    const auto r = grad_check([&] { return weighted_sum(block(f)); }, params);
    CHECK_MESSAGE(r.max_rel_err < 1e-4, r.worst);
  }
}

TEST_CASE("bimamba with tied directions commutes with reversal")
{
  Rng rng(23);
  MambaConfig cfg;
  cfg.ssm.state = 4;
  const BiMambaBlock block(5, cfg, true, rng);
  const Var f = constant(uniform({11, 5}, rng));
  const Tensor lhs = block(reverse_rows(f)).value();
  const Tensor rhs = reverse_rows(block(f)).value();
  for (Index i = 0; i < lhs.size(); ++i) CHECK(std::abs(lhs[i] - rhs[i]) < 1e-10);
}

TEST_CASE("bimamba at length one is the sum of both directions")
{
  Rng rng(24);
  MambaConfig cfg;
  cfg.ssm.state = 4;
  const BiMambaBlock block(3, cfg, false, rng);
  const Var f = constant(uniform({1, 3}, rng));
  const Tensor y = block(f).value();
  const Tensor want = add(block.forward_dir(f), block.backward_dir(f)).value();
  for (Index i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(want[i]).epsilon(1e-14));
}

TEST_CASE("bimamba has a full receptive field")
{
  Rng rng(25);
  MambaConfig cfg;
  cfg.ssm.state = 4;
  const BiMambaBlock block(3, cfg, false, rng);
  const Tensor f = uniform({16, 3}, rng);
  const Tensor base = block(constant(f)).value();
  for (Index j = 0; j < 16; ++j) {
    Tensor g = f;
    g(j, 0) += 0.5;
    const Tensor out = block(constant(g)).value();
    for (Index t = 0; t < 16; ++t) {
      double change = 0.0;
      for (Index c = 0; c < 3; ++c) change = std::max(change, std::abs(out(t, c) - base(t, c)));
      CHECK(change > 0.0);
    }
  }
}
