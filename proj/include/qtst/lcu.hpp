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
/**
 * @file lcu.hpp
 * Linear combination of unitaries M = sum_j b_j U_j as a block encoding.
 *
 * Register layout of every block encoding: data qubits occupy [0, n_data),
 * ancillas occupy [n_data, n_data + ancilla_count). The encoded block is the
 * data-register operator obtained with all ancillas prepared in and
 * postselected on |0...0>.
 */
#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "qtst/core.hpp"
#include "qtst/qsim.hpp"

namespace qtst::lcu {

using qsim::CircuitDescription;
using qsim::Matrix;
using qsim::Statevector;

struct NormalizedWeights {
  std::vector<Complex> weights;
  /// raw == scale * weights.
  double scale = 1.0;
};

inline double l1_norm(std::span<const Complex> w) {
  double s = 0.0;
  for (const auto& x : w) s += std::abs(x);
  return s;
}

/// b = raw / max(1, sum |raw_j|).
inline NormalizedWeights normalize_weights(std::span<const Complex> raw) {
  const double total = l1_norm(raw);
  QTST_REQUIRE(total > 0.0, ErrorCode::kAllZeroWeights,
               "cannot normalize an all-zero weight vector");
  NormalizedWeights out;
  out.scale = std::max(1.0, total);
  out.weights.reserve(raw.size());
  for (const auto& x : raw) out.weights.push_back(x / out.scale);
  return out;
}

struct LcuPlan {
  std::vector<Complex> weights;
  /// Parameter-free circuits over the data register.
  std::vector<CircuitDescription> unitaries;

  std::size_t ancilla_count() const { return ceil_log2(unitaries.size()); }
};

struct BlockEncoding {
  CircuitDescription circuit;
  std::size_t n_data = 0;
  std::size_t ancilla_count = 0;
  /// The block equals M / alpha.
  double alpha = 1.0;

  /// Dense data block at ancilla |0...0>, i.e. M / alpha.
  Matrix block() const {
    const Matrix u = qsim::dense_unitary(circuit);
    const auto d = static_cast<Eigen::Index>(std::size_t{1} << n_data);
    return u.topLeftCorner(d, d);
  }
};

/// Unitary whose first column is the unit vector `first_column`, built as a
/// phased Householder reflection.
inline Matrix completion_with_first_column(const Eigen::VectorXcd& first_column) {
  const Eigen::Index dim = first_column.size();
  const double phase =
      std::abs(first_column(0)) > 0.0 ? std::arg(first_column(0)) : 0.0;
  const Complex rot = std::polar(1.0, phase);
  Eigen::VectorXcd a = first_column / rot;  // a(0) real, >= 0
  Eigen::VectorXcd u = -a;
  u(0) += 1.0;
  const double nrm = u.norm();
  Matrix m = Matrix::Identity(dim, dim);
  if (nrm > 1e-15) {
    u /= nrm;
    m -= 2.0 * u * u.adjoint();
  }
  return rot * m;
}

/// Circuit UNPREPARE * SELECT * PREPARE.
///
/// PREPARE maps |0>_anc to sum_j sqrt(|b_j| / alpha) e^{i arg b_j} |j>, so the
/// phases of the weights live entirely in PREPARE. UNPREPARE is the adjoint
/// of the phase-free preparation sum_j sqrt(|b_j| / alpha) |j>; the
/// resulting block is sum_j b_j U_j / alpha with alpha = sum_j |b_j|.
/// Unitaries beyond J are identity padding with zero weight.
inline BlockEncoding build_block_encoding(const LcuPlan& plan) {
  const std::size_t n_terms = plan.unitaries.size();
  QTST_REQUIRE(n_terms > 0, ErrorCode::kInvalidArgument, "empty LCU plan");
  QTST_REQUIRE(plan.weights.size() == n_terms, ErrorCode::kDimensionMismatch,
               std::to_string(plan.weights.size()) + " weights for " +
                   std::to_string(n_terms) + " unitaries");
  const std::size_t n_data = plan.unitaries.front().n_qubits;
  for (const auto& u : plan.unitaries) {
    QTST_REQUIRE(u.n_qubits == n_data, ErrorCode::kMixedRegisterSizes,
                 "LCU unitaries act on " + std::to_string(n_data) + " and " +
                     std::to_string(u.n_qubits) + " qubits");
    QTST_REQUIRE(u.n_param_slots == 0, ErrorCode::kInvalidArgument,
                 "LCU unitaries must be bound (parameter-free)");
  }
  const double alpha = l1_norm(plan.weights);
  QTST_REQUIRE(alpha > 0.0, ErrorCode::kAllZeroWeights, "all LCU weights are zero");

  BlockEncoding be;
  be.n_data = n_data;
  be.ancilla_count = plan.ancilla_count();
  be.alpha = alpha;
  const std::size_t width = n_data + be.ancilla_count;
  be.circuit.n_qubits = width;

  std::vector<std::size_t> identity_map(n_data);
  std::iota(identity_map.begin(), identity_map.end(), std::size_t{0});

  if (be.ancilla_count == 0) {
    be.circuit.append(qsim::remap(plan.unitaries[0], identity_map, width));
    const double phase = std::arg(plan.weights[0]);
    if (phase != 0.0) be.circuit.add(qsim::gates::global_phase(phase));
    return be;
  }

  std::vector<std::size_t> anc(be.ancilla_count);
  std::iota(anc.begin(), anc.end(), n_data);
  const std::size_t slots = std::size_t{1} << be.ancilla_count;

  Eigen::VectorXcd prep = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(slots));
  Eigen::VectorXcd unprep = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(slots));
  for (std::size_t j = 0; j < n_terms; ++j) {
    const double mag = std::sqrt(std::abs(plan.weights[j]) / alpha);
    prep(static_cast<Eigen::Index>(j)) = std::polar(mag, std::arg(plan.weights[j]));
    unprep(static_cast<Eigen::Index>(j)) = mag;
  }

  be.circuit.add(qsim::gates::unitary(anc, completion_with_first_column(prep)));
  for (std::size_t j = 0; j < n_terms; ++j) {
    if (plan.weights[j] == Complex{}) continue;
    // Controlled on ancilla value j: flip the zero bits around an all-ones
    // control.
    for (std::size_t b = 0; b < anc.size(); ++b)
      if (!(j >> b & 1U)) be.circuit.add(qsim::gates::x(anc[b]));
    be.circuit.add(qsim::gates::controlled(
        anc, qsim::remap(plan.unitaries[j], identity_map, width)));
    for (std::size_t b = 0; b < anc.size(); ++b)
      if (!(j >> b & 1U)) be.circuit.add(qsim::gates::x(anc[b]));
  }
  be.circuit.add(qsim::gates::unitary(
      anc, Matrix(completion_with_first_column(unprep).adjoint())));
  return be;
}

struct PostselectedState {
  Statevector state;
  double success_prob = 0.0;
};

inline constexpr double kMinSuccessProb = 1e-14;

/// Runs the block encoding on |0>_anc |state> and keeps the ancilla-zero
/// branch. success_prob = ||M state||^2 / alpha^2.
inline PostselectedState apply_postselected(const BlockEncoding& be,
                                            const Statevector& state) {
  QTST_REQUIRE(state.n_qubits() == be.n_data, ErrorCode::kDimensionMismatch,
               "state on " + std::to_string(state.n_qubits()) +
                   " qubits, block encoding data register has " +
                   std::to_string(be.n_data));
  std::vector<Complex> full(std::size_t{1} << be.circuit.n_qubits, Complex{});
  std::copy(state.amplitudes().begin(), state.amplitudes().end(), full.begin());
  auto out = qsim::run_circuit(be.circuit, {},
                               Statevector::from_amplitudes(std::move(full)));
  std::vector<Complex> branch(out.amplitudes().begin(),
                              out.amplitudes().begin() +
                                  static_cast<std::ptrdiff_t>(state.dim()));
  PostselectedState result{Statevector::from_amplitudes(std::move(branch)), 0.0};
  result.success_prob = result.state.squared_norm();
  QTST_REQUIRE(result.success_prob >= kMinSuccessProb,
               ErrorCode::kPostselectionImpossible,
               "ancilla-zero branch has probability " +
                   std::to_string(result.success_prob));
  result.state.normalize();
  return result;
}

}  // namespace qtst::lcu
