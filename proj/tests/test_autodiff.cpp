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

using namespace survmamba;
using namespace survmamba::testing;

namespace {

void check_close(const Tensor& got, const Tensor& want, double tol = 1e-12)
{
  REQUIRE(got.shape() == want.shape());
  for (Index i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(tol));
}

bool throws_kind(const std::function<void()>& fn, ErrorKind kind)
{
  try {
    fn();
  } catch (const Error& e) {
    return e.kind() == kind;
  }
  return false;
}

}  // namespace

TEST_CASE("matmul values")
{
  const Var eye = constant(Tensor::matrix({{1, 0}, {0, 1}}));
  const Var m = constant(Tensor::matrix({{1, 2}, {3, 4}}));
  check_close(matmul(eye, m).value(), m.value());
  CHECK(matmul(constant(Tensor::matrix({{1, 2}})), constant(Tensor::matrix({{3}, {4}}))).value().item() == 11);
  CHECK(throws_kind([&] { matmul(m, constant(Tensor::matrix({{1, 2, 3}}))); }, ErrorKind::Dimension));
}

TEST_CASE("matmul gradient of sum is the row-broadcast of column sums of b")
{
  Rng rng(3);
  const Var a = parameter(uniform({3, 4}, rng));
  const Var b = parameter(uniform({4, 2}, rng));
  {
    Tape tape;
    TapeScope scope(tape);
    backward(tape, sum(matmul(a, b)));
  }
  const Eigen::RowVectorXd row_sums = b.value().matrix().rowwise().sum().transpose();
  for (Index i = 0; i < 3; ++i)
    for (Index k = 0; k < 4; ++k) CHECK(a.grad()(i, k) == doctest::Approx(row_sums[k]).epsilon(1e-12));
  const auto r = grad_check([&] { return sum(matmul(a, b)); }, as_params({a, b}));
  CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("matmul is linear in its left argument")
{
  Rng rng(4);
  const Var a = constant(uniform({5, 3}, rng));
  const Var b = constant(uniform({5, 3}, rng));
  const Var c = constant(uniform({3, 6}, rng));
  const Tensor lhs = matmul(a + b, c).value();
  const Tensor rhs = (matmul(a, c) + matmul(b, c)).value();
  for (Index i = 0; i < lhs.size(); ++i) CHECK(std::abs(lhs[i] - rhs[i]) < 1e-12);
}

TEST_CASE("elementwise values")
{
  CHECK(silu(constant(Tensor::scalar(0.0))).value().item() == 0.0);
  CHECK(silu(constant(Tensor::scalar(1.0))).value().item() == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  check_close(add(constant(Tensor::vector({1, 2})), constant(Tensor::vector({3, 4}))).value(),
              Tensor::vector({4, 6}));
  check_close(mul(constant(Tensor::scalar(2)), constant(Tensor::vector({3, 4}))).value(), Tensor::vector({6, 8}));
  CHECK(throws_kind([] { log(constant(Tensor::vector({1.0, 0.0}))); }, ErrorKind::Domain));
  CHECK(throws_kind([] { log(constant(Tensor::vector({-1.0}))); }, ErrorKind::Domain));
  CHECK(throws_kind([] { add(constant(Tensor::vector({1, 2})), constant(Tensor::vector({1, 2, 3}))); },
                    ErrorKind::Dimension));
}

TEST_CASE("elementwise gradients match finite differences")
{
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    const Var x = parameter(uniform({3, 4}, rng));
    const Var y = parameter(uniform({3, 4}, rng));
    const Var s = parameter(uniform({1}, rng));
    const Var pos = parameter(uniform({3, 4}, rng, 0.5, 2.0));
    const ParamList xy = as_params({x, y});
    CHECK(grad_check([&] { return weighted_sum(add(x, y)); }, xy).max_rel_err < 1e-4);
    CHECK(grad_check([&] { return weighted_sum(sub(x, y)); }, xy).max_rel_err < 1e-4);
    CHECK(grad_check([&] { return weighted_sum(mul(x, y)); }, xy).max_rel_err < 1e-4);
    CHECK(grad_check([&] { return weighted_sum(mul(s, x)); }, as_params({s, x})).max_rel_err < 1e-4);
    CHECK(grad_check([&] { return weighted_sum(add(x, s)); }, as_params({s, x})).max_rel_err < 1e-4);
    CHECK(grad_check([&] { return weighted_sum(scale(x, -1.5)); }, as_params({x})).max_rel_err < 1e-4);
    for (UnaryOp op : {UnaryOp::Silu, UnaryOp::Sigmoid, UnaryOp::Softplus, UnaryOp::Exp, UnaryOp::Neg})
      CHECK(grad_check([&] { return weighted_sum(unary(op, x)); }, as_params({x})).max_rel_err < 1e-4);
    CHECK(grad_check([&] { return weighted_sum(log(pos)); }, as_params({pos})).max_rel_err < 1e-4);
    CHECK(grad_check([&] { return weighted_sum(clamp(x, -1.0, 1.0)); }, as_params({x})).max_rel_err < 1e-4);
  }
}

TEST_CASE("layer_norm")
{
  const Var g = constant(Tensor::constant({3}, 1.0));
  const Var b = constant(Tensor::constant({3}, 0.0));
  check_close(layer_norm(constant(Tensor::matrix({{5, 5, 5}})), g, b).value(), Tensor::matrix({{0, 0, 0}}));
  const Tensor y = layer_norm(constant(Tensor::matrix({{1, 3}})), constant(Tensor::constant({2}, 1.0)),
                              constant(Tensor::constant({2}, 0.0)), 1e-300)
                       .value();
  CHECK(y(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(y(0, 1) == doctest::Approx(1.0).epsilon(1e-12));

  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    const Var x = parameter(uniform({4, 6}, rng));
    const Var gamma = parameter(uniform({6}, rng));
    const Var beta = parameter(uniform({6}, rng));
    const auto r = grad_check([&] { return weighted_sum(layer_norm(x, gamma, beta)); }, as_params({x, gamma, beta}));
    CHECK_MESSAGE(r.max_rel_err < 1e-4, r.worst);
  }
}

TEST_CASE("depthwise_conv1d")
{
  const Var x = constant(Tensor::matrix({{1}, {2}, {3}}));
  check_close(depthwise_conv1d(x, constant(Tensor::matrix({{1}}))).value(), x.value());
  check_close(depthwise_conv1d(x, constant(Tensor::matrix({{1}, {1}}))).value(), Tensor::matrix({{1}, {3}, {5}}));
  CHECK(throws_kind([&] { depthwise_conv1d(x, constant(Tensor::matrix({{1, 1}}))); }, ErrorKind::Dimension));

  Rng rng(5);
  Tensor in = uniform({6, 3}, rng);
  const Var k = constant(uniform({4, 3}, rng));
  const Tensor before = depthwise_conv1d(constant(in), k).value();
  in(5, 1) += 1.0;
  const Tensor after = depthwise_conv1d(constant(in), k).value();
  for (Index t = 0; t < 5; ++t)
    for (Index c = 0; c < 3; ++c) CHECK(before(t, c) == after(t, c));

  for (std::uint64_t seed : {1, 2, 3}) {
    Rng r2(seed);
    const Var xs = parameter(uniform({7, 3}, r2));
    const Var ks = parameter(uniform({3, 3}, r2));
    const auto r = grad_check([&] { return weighted_sum(depthwise_conv1d(xs, ks)); }, as_params({xs, ks}));
    CHECK_MESSAGE(r.max_rel_err < 1e-4, r.worst);
  }
}

TEST_CASE("max_pool_sequence")
{
  check_close(max_pool_sequence(constant(Tensor::matrix({{1, 4}}))).value(), Tensor::vector({1, 4}));
  check_close(max_pool_sequence(constant(Tensor::matrix({{1, 4}, {3, 2}}))).value(), Tensor::vector({3, 4}));

  const Var tie = parameter(Tensor::matrix({{2, 1}, {2, 5}}));
  {
    Tape tape;
    TapeScope scope(tape);
    backward(tape, sum(max_pool_sequence(tie)));
  }
  check_close(tie.grad(), Tensor::matrix({{1, 0}, {0, 1}}));

  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    const Var x = parameter(uniform({5, 4}, rng));
    const auto r = grad_check([&] { return weighted_sum(max_pool_sequence(x)); }, as_params({x}));
    CHECK_MESSAGE(r.max_rel_err < 1e-4, r.worst);
  }
}

TEST_CASE("shape ops")
{
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    const Var a = parameter(uniform({3, 2}, rng));
    const Var b = parameter(uniform({2, 2}, rng));
    const Var row = parameter(uniform({2}, rng));
    const Var bias = parameter(uniform({2}, rng));
    CHECK(grad_check([&] { return weighted_sum(concat_rows(a, b)); }, as_params({a, b})).max_rel_err < 1e-4);
    CHECK(grad_check([&] { return weighted_sum(slice_rows(a, 1, 2)); }, as_params({a})).max_rel_err < 1e-4);
    CHECK(grad_check([&] { return weighted_sum(reverse_rows(a)); }, as_params({a})).max_rel_err < 1e-4);
    CHECK(grad_check([&] { return weighted_sum(repeat_rows(row, 4)); }, as_params({row})).max_rel_err < 1e-4);
    CHECK(grad_check([&] { return weighted_sum(reshape(a, {6})); }, as_params({a})).max_rel_err < 1e-4);
    CHECK(grad_check([&] { return weighted_sum(add_bias(a, bias)); }, as_params({a, bias})).max_rel_err < 1e-4);
  }
}

TEST_CASE("backward")
{
  Rng rng(6);
  const Var x = parameter(uniform({2, 3}, rng));
  {
    Tape tape;
    TapeScope scope(tape);
    backward(tape, sum(x));
  }
  check_close(x.grad(), Tensor::constant({2, 3}, 1.0));

  Var y = parameter(x.value());
  {
    Tape tape;
    TapeScope scope(tape);
    backward(tape, sum(y * y));
  }
  Tensor twice = y.value();
  twice.array() *= 2.0;
  check_close(y.grad(), twice);

  Tape tape;
  TapeScope scope(tape);
  const Var v = x * x;
  CHECK(throws_kind([&] { backward(tape, v); }, ErrorKind::Contract));
  Tape empty;
  CHECK(throws_kind([&] { backward(empty, sum(x)); }, ErrorKind::Contract));
}

TEST_CASE("every tracked leaf receives a gradient of its own shape")
{
  Rng rng(7);
  const Var a = parameter(uniform({3, 4}, rng));
  const Var b = parameter(uniform({4}, rng));
  const Var unused = parameter(uniform({2, 2}, rng));
  Tape tape;
  {
    TapeScope scope(tape);
    backward(tape, sum(silu(add_bias(a, b))));
  }
  CHECK(a.grad().shape() == a.shape());
  CHECK(b.grad().shape() == b.shape());
  CHECK(unused.grad().shape() == unused.shape());
}

TEST_CASE("forward evaluation is deterministic")
{
  Rng r1(8), r2(8);
  const Tensor a = uniform({4, 5}, r1);
  const Tensor b = uniform({4, 5}, r2);
  const Tensor y1 = layer_norm(silu(constant(a)), constant(Tensor::constant({5}, 1.0)), constant(Tensor::constant({5}, 0.0))).value();
  const Tensor y2 = layer_norm(silu(constant(b)), constant(Tensor::constant({5}, 1.0)), constant(Tensor::constant({5}, 0.0))).value();
  for (Index i = 0; i < y1.size(); ++i) CHECK(y1[i] == y2[i]);
}

TEST_CASE("operations outside a tape are not recorded")
{
  const Var p = parameter(Tensor::vector({1, 2}));
  Tape tape;
  const Var out = p * p;
  CHECK(tape.empty());
  CHECK(active_tape() == nullptr);
  {
    TapeScope scope(tape);
    NoGradScope off;
    (void)(p * p);
  }
  CHECK(tape.empty());
}

TEST_CASE("non-finite results are numeric errors")
{
  CHECK(throws_kind([] { exp(constant(Tensor::scalar(1000.0))); }, ErrorKind::Numeric));
}
