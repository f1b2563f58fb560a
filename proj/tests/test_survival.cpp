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
#include "survmamba/survival.hpp"

using namespace survmamba;
using namespace survmamba::testing;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v)
{
  Eigen::VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("survival function examples")
{
  const auto half = vec({0.5, 0.5, 0.5, 0.5});
  CHECK(survival_at(half, 0) == 1.0);
  CHECK(survival_at(half, 2) == 0.25);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  for (Index k = 0; k <= 4; ++k) CHECK(survival_at(zero, k) == 1.0);
  CHECK_THROWS_AS(survival_at(half, 5), Error);
  CHECK_THROWS_AS(survival_at(half, -1), Error);
}

TEST_CASE("survival function recursion and range")
{
  Rng rng(50);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd h = uniform({6}, rng, kHazardClamp, 1 - kHazardClamp).storage();
    for (Index k = 1; k <= 6; ++k) {
      CHECK(survival_at(h, k) == doctest::Approx(survival_at(h, k - 1) * (1 - h[k - 1])).epsilon(1e-15));
      CHECK(survival_at(h, k) <= survival_at(h, k - 1));
      CHECK(survival_at(h, k) > 0.0);
    }
  }
}

TEST_CASE("survival loss examples")
{
  const auto half = vec({0.5, 0.5, 0.5, 0.5});
  CHECK(survival_nll(half, 2, 0) == doctest::Approx(2 * std::log(2.0)).epsilon(1e-15));
  CHECK(survival_nll(half, 2, 1) == doctest::Approx(2 * std::log(2.0)).epsilon(1e-15));
  const auto h = vec({0.2, 0.7, 0.1});
  CHECK(survival_nll(h, 1, 0) == doctest::Approx(-std::log(0.2)).epsilon(1e-15));
  CHECK_THROWS_AS(survival_nll(h, 0, 0), Error);
  CHECK_THROWS_AS(survival_nll(h, 4, 0), Error);
  CHECK_THROWS_AS(survival_nll(h, 1, 2), Error);
}

TEST_CASE("survival loss is nonnegative and an event's likelihood is its bin probability")
{
  Rng rng(51);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::VectorXd h = uniform({4}, rng, kHazardClamp, 1 - kHazardClamp).storage();
    for (Index k = 1; k <= 4; ++k) {
      CHECK(survival_nll(h, k, 0) >= 0.0);
      CHECK(survival_nll(h, k, 1) >= 0.0);
      CHECK(std::exp(-survival_nll(h, k, 0)) == doctest::Approx(survival_at(h, k - 1) * h[k - 1]).epsilon(1e-12));
    }
  }
}

TEST_CASE("differentiable survival loss matches the scalar form and finite differences")
{
  Rng rng(52);
  for (int trial = 0; trial < 3; ++trial) {
    const Var h = parameter(uniform({4}, rng, 0.05, 0.95));
    for (Index k = 1; k <= 4; ++k)
      for (int c : {0, 1}) {
        CHECK(survival_nll(h, k, c).value().item() ==
              doctest::Approx(survival_nll(h.value().storage(), k, c)).epsilon(1e-14));
        const auto r = grad_check([&] { return survival_nll(h, k, c); }, as_params({h}));
        CHECK_MESSAGE(r.max_rel_err < 1e-5, r.worst);
      }
  }
}

TEST_CASE("risk score examples and monotonicity")
{
  const Eigen::VectorXd high = Eigen::VectorXd::Constant(4, 1 - kHazardClamp);
  const Eigen::VectorXd low = Eigen::VectorXd::Constant(4, kHazardClamp);
  CHECK(std::abs(risk_score(high)) < 1e-6);
  CHECK(risk_score(low) == doctest::Approx(-4.0).epsilon(1e-6));

  Rng rng(53);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd h = uniform({4}, rng, 0.01, 0.9).storage();
    for (Index k = 0; k < 4; ++k) {
      Eigen::VectorXd up = h;
      up[k] += 0.05;
      CHECK(risk_score(up) > risk_score(h));
    }
  }
}

TEST_CASE("hazard head examples")
{
  Rng rng(54);
  HazardHead head(6, 4, rng);
  head.classifier.weight.mutable_value().storage().setZero();
  head.classifier.bias.mutable_value().storage().setZero();
  const Var seq = constant(uniform({5, 6}, rng));
  const Tensor h = head(seq).value();
  REQUIRE(h.shape() == Shape{4});
  for (Index k = 0; k < 4; ++k) CHECK(h[k] == 0.5);

  head.classifier.bias.mutable_value().storage().setConstant(50.0);
  const Tensor sat = head(seq).value();
  for (Index k = 0; k < 4; ++k) CHECK(sat[k] == 1 - kHazardClamp);
  head.classifier.bias.mutable_value().storage().setConstant(-50.0);
  const Tensor low = head(seq).value();
  for (Index k = 0; k < 4; ++k) CHECK(low[k] == kHazardClamp);

  CHECK_THROWS_AS(HazardHead(6, 1, rng), Error);
}

TEST_CASE("hazard head gradients")
{
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    const HazardHead head(8, 4, rng);
    const Var seq = parameter(uniform({6, 8}, rng));
    ParamList params;
    head.collect(params, "head");
    params.push_back({"seq", seq});
    const auto r = grad_check([&] { return weighted_sum(head(seq)); }, params);
    CHECK_MESSAGE(r.max_rel_err < 1e-4, r.worst);
  }
}
