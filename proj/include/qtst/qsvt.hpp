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
 * @file qsvt.hpp
 * Polynomial transformation P_c(M) = sum_k c_k M^k of a block-encoded M.
 *
 * The polynomial is realized as a second-level LCU over block encodings of
 * the powers M^0 .. M^d. The power M^k chains k copies of the input block
 * encoding, each on its own fresh ancilla register, so its block is
 * M^k / alpha^k. Weighting the k-th power by c_k alpha^k then block-encodes
 * P_c(M) / sum_k |c_k| alpha^k.
 */
#pragma once

#include <vector>

#include "qtst/core.hpp"
#include "qtst/lcu.hpp"
#include "qtst/qsim.hpp"

namespace qtst::qsvt {

using lcu::BlockEncoding;
using lcu::PostselectedState;
using qsim::CircuitDescription;
using qsim::Statevector;

inline constexpr std::size_t kMaxDegree = 6;

struct PolynomialSpec {
  /// c_0 .. c_d.
  std::vector<Complex> coefficients;

  std::size_t degree() const {
    return coefficients.empty() ? 0 : coefficients.size() - 1;
  }
};

/// Block encodings of M^0 .. M^degree sharing one register layout of
/// n_data + degree * ancilla_count(be) qubits.
inline std::vector<BlockEncoding> build_power_blocks(const BlockEncoding& be,
                                                     std::size_t degree) {
  QTST_REQUIRE(degree <= kMaxDegree, ErrorCode::kDegreeTooLarge,
               "degree " + std::to_string(degree) + " > " +
                   std::to_string(kMaxDegree));
  const std::size_t a = be.ancilla_count;
  const std::size_t width = be.n_data + degree * a;
  std::vector<BlockEncoding> powers;
  powers.reserve(degree + 1);
  for (std::size_t k = 0; k <= degree; ++k) {
    BlockEncoding p;
    p.n_data = be.n_data;
    p.ancilla_count = degree * a;
    p.alpha = std::pow(be.alpha, static_cast<double>(k));
    p.circuit.n_qubits = width;
    for (std::size_t copy = 0; copy < k; ++copy) {
      std::vector<std::size_t> mapping(be.n_data + a);
      for (std::size_t q = 0; q < be.n_data; ++q) mapping[q] = q;
      for (std::size_t r = 0; r < a; ++r) mapping[be.n_data + r] = be.n_data + copy * a + r;
      p.circuit.append(qsim::remap(be.circuit, mapping, width));
    }
    powers.push_back(std::move(p));
  }
  return powers;
}

/// Block encoding of P_c(M) with alpha = sum_k |c_k| alpha_M^k.
inline BlockEncoding build_polynomial_block_encoding(const PolynomialSpec& spec,
                                                     const BlockEncoding& be) {
  QTST_REQUIRE(!spec.coefficients.empty(), ErrorCode::kInvalidArgument,
               "polynomial without coefficients");
  const std::size_t d = spec.degree();
  auto powers = build_power_blocks(be, d);

  std::vector<Complex> raw(d + 1);
  for (std::size_t k = 0; k <= d; ++k)
    raw[k] = spec.coefficients[k] * powers[k].alpha;
  QTST_REQUIRE(lcu::l1_norm(raw) > 0.0, ErrorCode::kPostselectionImpossible,
               "zero polynomial");
  const auto normalized = lcu::normalize_weights(raw);

  lcu::LcuPlan outer;
  outer.weights = normalized.weights;
  for (auto& p : powers) outer.unitaries.push_back(std::move(p.circuit));
  auto poly = lcu::build_block_encoding(outer);
  // The outer LCU treats data + power ancillas as its data register.
  poly.n_data = be.n_data;
  poly.ancilla_count = d * be.ancilla_count + outer.ancilla_count();
  poly.alpha *= normalized.scale;
  return poly;
}

/// out is proportional to P_c(M) state; success_prob = ||P_c(M) state||^2 / alpha_P^2.
inline PostselectedState apply_polynomial(const PolynomialSpec& spec,
                                          const BlockEncoding& be,
                                          const Statevector& state) {
  QTST_REQUIRE(spec.degree() <= kMaxDegree, ErrorCode::kDegreeTooLarge,
               "degree " + std::to_string(spec.degree()));
  QTST_REQUIRE(state.n_qubits() == be.n_data, ErrorCode::kDimensionMismatch,
               "state/block-encoding data register mismatch");
  return lcu::apply_postselected(build_polynomial_block_encoding(spec, be), state);
}

/// Total qubits used by the polynomial circuit over an LCU of `n_terms`
/// unitaries on `n_data` qubits.
inline std::size_t polynomial_circuit_width(std::size_t n_data, std::size_t n_terms,
                                            std::size_t degree) {
  return n_data + degree * ceil_log2(n_terms) + ceil_log2(degree + 1);
}

}  // namespace qtst::qsvt
