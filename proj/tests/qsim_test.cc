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
#include "qtst/qsim.hpp"

#include <sstream>

#include "gtest/gtest.h"
#include "oracles.hpp"

namespace qtst::qsim {
namespace {

using namespace gates;
using testing::oracle_unitary;

constexpr double kNormTol = 1e-12;
constexpr double kOracleTol = 1e-10;

double entropy_of_qubit0(const Statevector& s) {
  // Reduced density matrix of qubit 0 for a 2-qubit state.
  Eigen::Matrix2cd rho = Eigen::Matrix2cd::Zero();
  for (std::size_t hi = 0; hi < s.dim() / 2; ++hi)
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = 0; b < 2; ++b)
        rho(a, b) += s[2 * hi + a] * std::conj(s[2 * hi + b]);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(rho);
  double h = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double p = es.eigenvalues()(i);
    if (p > 1e-15) h -= p * std::log2(p);
  }
  return h;
}

TEST(ApplyGate, HadamardOnZero) {
  auto s = apply_gate(Statevector(1), h(0));
  EXPECT_NEAR(s[0].real(), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(s[1].real(), 1 / std::sqrt(2.0), 1e-15);
}

TEST(ApplyGate, RzOnZeroIsPhaseOnly) {
  const std::vector<double> p{0.731};
  auto s = apply_gate(Statevector(1), rz(0, 0), p);
  EXPECT_NEAR(std::abs(s[0]), 1.0, 1e-15);
  EXPECT_EQ(s[1], Complex{});
}

TEST(ApplyGate, CnotMakesBellState) {
  auto s = apply_gate(apply_gate(Statevector(2), h(0)), cnot(0, 1));
  const Eigen::Vector4cd oracle =
      testing::oracle_gate(cnot(0, 1), 2, {}) *
      testing::oracle_gate(h(0), 2, {}) * Eigen::Vector4cd(1, 0, 0, 0);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(std::abs(s[i] - oracle(i)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(s[0]), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(std::abs(s[3]), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(entropy_of_qubit0(s), 1.0, 1e-12);
}

TEST(ApplyGate, LittleEndianOrdering) {
  // X on qubit 1 of |00> gives index 2.
  auto s = apply_gate(Statevector(2), x(1));
  EXPECT_EQ(s[2], Complex(1.0));
}

TEST(ApplyGate, Errors) {
  try {
    apply_gate(Statevector(2), x(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIndexOutOfRange);
  }
  try {
    apply_gate(Statevector(2), ry(0, 3), std::vector<double>{0.1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingParam);
  }
  try {
    apply_gate(Statevector(2), cnot(1, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
}

TEST(ApplyGate, EveryKindIsUnitary) {
  Rng rng = substream(11, "gates");
  const std::vector<GateOp> ops{
      rx_fixed(0, 0.3), ry_fixed(1, -1.2), rz_fixed(2, 2.9), h(0), x(1), y(2),
      z(0), cnot(0, 2), cz(2, 1), global_phase(0.4),
      unitary({0, 2}, testing::random_unitary(4, rng)),
      controlled({1}, [] {
        CircuitDescription b;
        b.n_qubits = 3;
        b.add(ry_fixed(0, 0.7)).add(cnot(0, 2));
        return b;
      }())};
  for (const auto& op : ops) {
    CircuitDescription c;
    c.n_qubits = 3;
    c.add(op);
    const Matrix u = dense_unitary(c);
    EXPECT_LT((u.adjoint() * u - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(testing::max_abs_diff(u, oracle_unitary(c, {})), kOracleTol);
  }
}

TEST(RunCircuit, EmptyIsIdentity) {
  Rng rng = substream(3, "state");
  auto psi = testing::random_state(3, rng);
  CircuitDescription c;
  c.n_qubits = 3;
  EXPECT_EQ(run_circuit(c, {}, psi), psi);
}

TEST(RunCircuit, XXIsIdentity) {
  CircuitDescription c;
  c.n_qubits = 1;
  c.add(x(0)).add(x(0));
  EXPECT_EQ(run_circuit(c), Statevector(1));
}

TEST(RunCircuit, RandomFourQubitMatchesKronOracle) {
  Rng rng = substream(2024, "circuit");
  auto c = testing::random_circuit(4, 30, 5, rng);
  std::vector<double> params(5);
  for (auto& p : params) p = uniform(rng, -kPi, kPi);
  auto psi = testing::random_state(4, rng);
  auto out = run_circuit(c, params, psi);
  const Eigen::VectorXcd ref = oracle_unitary(c, params) * psi.to_vector();
  EXPECT_LT((out.to_vector() - ref).cwiseAbs().maxCoeff(), kOracleTol);
  EXPECT_NEAR(out.norm(), 1.0, kNormTol);
}

TEST(RunCircuit, ParamCountChecked) {
  CircuitDescription c;
  c.n_qubits = 1;
  c.n_param_slots = 2;
  c.add(rx(0, 1));
  EXPECT_THROW(run_circuit(c, std::vector<double>{0.1}), Error);
  EXPECT_THROW(run_circuit(c, std::vector<double>{0.1, 0.2, 0.3}), Error);
  EXPECT_NO_THROW(run_circuit(c, std::vector<double>{0.1, 0.2}));
}

TEST(RunCircuit, CompositionProperty) {
  Rng rng = substream(5, "compose");
  for (int trial = 0; trial < 20; ++trial) {
    auto a = testing::random_circuit(3, 15, 0, rng);
    auto b = testing::random_circuit(3, 15, 0, rng);
    auto psi = testing::random_state(3, rng);
    CircuitDescription ab = a;
    ab.append(b);
    auto sequential = run_circuit(b, {}, run_circuit(a, {}, psi));
    auto combined = run_circuit(ab, {}, psi);
    EXPECT_EQ(sequential, combined);
    const Eigen::VectorXcd ref = oracle_unitary(ab, {}) * psi.to_vector();
    EXPECT_LT((combined.to_vector() - ref).cwiseAbs().maxCoeff(), kNormTol);
  }
}

TEST(RunCircuit, RotationInverseRestoresState) {
  Rng rng = substream(6, "inverse");
  for (auto kind : {GateKind::kRX, GateKind::kRY, GateKind::kRZ}) {
    for (int trial = 0; trial < 10; ++trial) {
      auto psi = testing::random_state(3, rng);
      const double t = uniform(rng, -2 * kPi, 2 * kPi);
      const std::size_t q = static_cast<std::size_t>(trial % 3);
      auto out = apply_gate(apply_gate(psi, fixed_rotation(kind, q, t)),
                            fixed_rotation(kind, q, -t));
      EXPECT_LT((out.to_vector() - psi.to_vector()).cwiseAbs().maxCoeff(), kNormTol);
    }
  }
}

TEST(RunCircuit, NormPreservedOverLongCircuits) {
  Rng rng = substream(7, "norm");
  for (int trial = 0; trial < 20; ++trial) {
    auto c = testing::random_circuit(6, 200, 0, rng);
    auto out = run_circuit(c, {}, testing::random_state(6, rng));
    EXPECT_NEAR(out.norm(), 1.0, kNormTol);
  }
}

TEST(DenseUnitary, Hadamard) {
  CircuitDescription c;
  c.n_qubits = 1;
  c.add(h(0));
  Matrix expected(2, 2);
  expected << 1, 1, 1, -1;
  expected /= std::sqrt(2.0);
  EXPECT_LT(testing::max_abs_diff(dense_unitary(c), expected), 1e-15);
}

TEST(DenseUnitary, CircuitTimesInverseIsIdentity) {
  Rng rng = substream(8, "dense");
  auto c = testing::random_circuit(4, 40, 3, rng);
  std::vector<double> params{0.3, -1.1, 2.2};
  CircuitDescription round = c;
  round.append(inverse(c));
  EXPECT_LT(testing::max_abs_diff(dense_unitary(round, params), Matrix::Identity(16, 16)),
            kOracleTol);
}

TEST(DenseUnitary, CnotIsPermutation) {
  CircuitDescription c;
  c.n_qubits = 2;
  c.add(cnot(0, 1));
  const Matrix u = dense_unitary(c);
  int ones = 0;
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) {
      if (std::abs(u(i, j) - 1.0) < 1e-15) ++ones;
      else EXPECT_EQ(u(i, j), Complex{});
    }
  EXPECT_EQ(ones, 4);
}

TEST(DenseUnitary, TooLarge) {
  CircuitDescription c;
  c.n_qubits = 11;
  try {
    dense_unitary(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooLarge);
  }
}

TEST(DenseUnitary, CsvExport) {
  CircuitDescription c;
  c.n_qubits = 1;
  c.add(x(0));
  std::ostringstream os;
  write_unitary_csv(os, dense_unitary(c));
  EXPECT_EQ(os.str(), "0,0,1,0\n1,0,0,0\n");
}

TEST(InnerProduct, BasisStates) {
  EXPECT_EQ(inner_product(Statevector(1), Statevector(1)), Complex(1.0));
  EXPECT_EQ(inner_product(Statevector(1), Statevector::basis(1, 1)), Complex{});
  auto plus = apply_gate(Statevector(1), h(0));
  EXPECT_NEAR(std::abs(inner_product(plus, Statevector(1)) - 1 / std::sqrt(2.0)), 0.0, 1e-15);
  EXPECT_THROW(inner_product(Statevector(1), Statevector(2)), Error);
}

TEST(Circuit, BindAndValidate) {
  Rng rng = substream(9, "bind");
  auto c = testing::random_circuit(3, 25, 4, rng);
  std::vector<double> params{0.1, 0.2, -0.3, 0.4};
  EXPECT_NO_THROW(validate(c));
  auto bound = bind_parameters(c, params);
  EXPECT_EQ(bound.n_param_slots, 0u);
  EXPECT_LT(testing::max_abs_diff(dense_unitary(bound), dense_unitary(c, params)), 1e-14);
  c.add(rx(0, 9));
  EXPECT_THROW(validate(c), Error);
}

}  // namespace
}  // namespace qtst::qsim
