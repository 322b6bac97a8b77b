/* Copyright 2026 The QTST Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "qtst/observables.hpp"

#include "gtest/gtest.h"
#include "oracles.hpp"

namespace qtst::observables {
namespace {

using qsim::gates::h;
using qsim::gates::cnot;

Statevector plus_state() { return qsim::apply_gate(Statevector(1), h(0)); }

Statevector bell_state() {
  return qsim::apply_gate(qsim::apply_gate(Statevector(2), h(0)), cnot(0, 1));
}

TEST(Expectation, PauliZEigenstates) {
  const auto z = HermitianObservable::pauli_z(1, 0);
  EXPECT_DOUBLE_EQ(expectation(z, Statevector(1)), 1.0);
  EXPECT_NEAR(expectation(z, plus_state()), 0.0, 1e-15);

  PauliStringObservable zs{1, {{1.0, "Z"}}};
  EXPECT_DOUBLE_EQ(expectation(zs, Statevector(1)), 1.0);
  EXPECT_NEAR(expectation(zs, plus_state()), 0.0, 1e-15);
}

TEST(Expectation, RandomHermitianOnBellMatchesQuadraticForm) {
  Rng rng = substream(17, "herm");
  const auto obs = HermitianObservable::random(2, rng);
  const auto psi = bell_state();
  const Eigen::VectorXcd v = psi.to_vector();
  const Complex oracle = (v.adjoint() * obs.matrix() * v)(0, 0);
  EXPECT_NEAR(expectation(obs, psi), oracle.real(), 1e-10);
  EXPECT_LT(std::abs(oracle.imag()), 1e-12);
}

TEST(Expectation, DimensionMismatch) {
  EXPECT_THROW(expectation(HermitianObservable(2), Statevector(1)), Error);
  PauliStringObservable zs{2, {{1.0, "ZZ"}}};
  EXPECT_THROW(expectation(zs, Statevector(1)), Error);
}

TEST(Expectation, PauliStringMatchesDense) {
  Rng rng = substream(18, "pauli");
  PauliStringObservable obs{3, {{0.5, "XIZ"}, {-1.25, "YYI"}, {2.0, "ZZZ"}, {0.3, "IXY"}}};
  const qsim::Matrix m = obs.matrix();
  EXPECT_LT((m - m.adjoint()).cwiseAbs().maxCoeff(), 1e-14);
  for (int trial = 0; trial < 10; ++trial) {
    auto psi = testing::random_state(3, rng);
    const Eigen::VectorXcd v = psi.to_vector();
    const Complex oracle = (v.adjoint() * m * v)(0, 0);
    const Complex got = expectation_complex(obs, psi);
    EXPECT_NEAR(got.real(), oracle.real(), 1e-10);
    EXPECT_LT(std::abs(got.imag()), 1e-12);
  }
}

TEST(Hermitian, StructuralHermiticity) {
  Rng rng = substream(19, "structure");
  auto obs = HermitianObservable::random(3, rng);
  auto p = obs.parameters();
  ASSERT_EQ(p.size(), 64u);
  for (auto& x : p) x += uniform(rng, -1, 1);
  obs.set_parameters(p);
  const qsim::Matrix m = obs.matrix();
  EXPECT_LT((m - m.adjoint()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(obs.parameters(), p);
}

TEST(Hermitian, RealnessOverRandomStates) {
  Rng rng = substream(20, "real");
  for (int trial = 0; trial < 50; ++trial) {
    auto obs = HermitianObservable::random(3, rng);
    auto psi = testing::random_state(3, rng);
    EXPECT_LT(std::abs(expectation_complex(obs, psi).imag()), 1e-12);
  }
}

TEST(Hermitian, Linearity) {
  Rng rng = substream(21, "linear");
  for (int trial = 0; trial < 20; ++trial) {
    auto h1 = HermitianObservable::random(2, rng);
    auto h2 = HermitianObservable::random(2, rng);
    const double a = uniform(rng, -3, 3);
    const double b = uniform(rng, -3, 3);
    auto psi = testing::random_state(2, rng);
    EXPECT_NEAR(expectation(a * h1 + b * h2, psi),
                a * expectation(h1, psi) + b * expectation(h2, psi), 1e-10);
  }
}

TEST(GradEntries, BasisStateZero) {
  const auto g = expectation_grad_entries(HermitianObservable(1), Statevector(1));
  EXPECT_EQ(g(0, 0), Complex(1.0));
  EXPECT_EQ(g(0, 1), Complex{});
  EXPECT_EQ(g(1, 0), Complex{});
  EXPECT_EQ(g(1, 1), Complex{});
}

TEST(GradEntries, PlusStateAllHalf) {
  const auto g = expectation_grad_entries(HermitianObservable(1), plus_state());
  for (int k = 0; k < 2; ++k)
    for (int l = 0; l < 2; ++l) EXPECT_NEAR(std::abs(g(k, l) - 0.5), 0.0, 1e-15);
}

TEST(GradEntries, MatchesFiniteDifferences) {
  Rng rng = substream(22, "fd");
  auto obs = HermitianObservable::random(2, rng);
  const auto psi = testing::random_state(2, rng);
  const auto analytic = expectation_grad_parameters(obs, psi);
  const auto p0 = obs.parameters();
  auto f = [&](const std::vector<double>& p) {
    HermitianObservable o(2);
    o.set_parameters(p);
    return expectation(o, psi);
  };
  for (std::size_t i = 0; i < p0.size(); ++i) {
    const double fd = testing::central_difference(f, p0, i, 1e-5);
    EXPECT_LE(std::abs(analytic[i] - fd), 1e-6 * std::max(1.0, std::abs(fd))) << i;
  }
}

}  // namespace
}  // namespace qtst::observables
