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
 * @file qsim.hpp
 * Exact dense statevector simulator.
 *
 * Qubit ordering is little-endian: qubit q is bit q of the amplitude index,
 * so qubit 0 is the least significant bit.
 *
 * Rotations follow the usual convention R_P(t) = exp(-i t P / 2).
 */
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "qtst/core.hpp"

namespace qtst::qsim {

using Matrix = Eigen::MatrixXcd;

class Statevector {
 public:
  /// |0...0> on n qubits.
  explicit Statevector(std::size_t n_qubits = 0)
      : n_qubits_(n_qubits), amps_(std::size_t{1} << n_qubits, Complex{}) {
    amps_[0] = 1.0;
  }

  static Statevector basis(std::size_t n_qubits, std::size_t index) {
    QTST_REQUIRE(index < (std::size_t{1} << n_qubits),
                 ErrorCode::kIndexOutOfRange,
                 "basis index " + std::to_string(index));
    Statevector s(n_qubits);
    s.amps_[0] = 0.0;
    s.amps_[index] = 1.0;
    return s;
  }

  static Statevector from_amplitudes(std::vector<Complex> amps) {
    const std::size_t n = ceil_log2(amps.size());
    QTST_REQUIRE(!amps.empty() && (std::size_t{1} << n) == amps.size(),
                 ErrorCode::kDimensionMismatch,
                 "amplitude count must be a power of two");
    Statevector s;
    s.n_qubits_ = n;
    s.amps_ = std::move(amps);
    return s;
  }

  std::size_t n_qubits() const noexcept { return n_qubits_; }
  std::size_t dim() const noexcept { return amps_.size(); }

  std::span<const Complex> amplitudes() const noexcept { return amps_; }
  std::span<Complex> amplitudes() noexcept { return amps_; }

  const Complex& operator[](std::size_t i) const { return amps_[i]; }
  Complex& operator[](std::size_t i) { return amps_[i]; }

  double squared_norm() const {
    double acc = 0.0;
    for (const auto& a : amps_) acc += std::norm(a);
    return acc;
  }
  double norm() const { return std::sqrt(squared_norm()); }

  /// Rescales to unit norm and returns the norm before rescaling.
  double normalize() {
    const double nrm = norm();
    if (nrm > 0.0) {
      for (auto& a : amps_) a /= nrm;
    }
    return nrm;
  }

  Eigen::VectorXcd to_vector() const {
    return Eigen::Map<const Eigen::VectorXcd>(amps_.data(),
                                              static_cast<Eigen::Index>(dim()));
  }

  friend bool operator==(const Statevector&, const Statevector&) = default;

 private:
  std::size_t n_qubits_;
  std::vector<Complex> amps_;
};

enum class GateKind {
  kRX,
  kRY,
  kRZ,
  kHadamard,
  kPauliX,
  kPauliY,
  kPauliZ,
  kCNOT,
  kCZ,
  kControlledUnitary,
  kGlobalPhase,
  // Dense k-qubit unitary. Used for direct state-preparation isometries.
  kUnitary,
};

inline bool is_parameterized(GateKind kind) {
  return kind == GateKind::kRX || kind == GateKind::kRY ||
         kind == GateKind::kRZ || kind == GateKind::kGlobalPhase;
}

struct CircuitDescription;

/// One gate. For parameterized kinds the effective angle is
/// `angle + scale * params[*param_slot]`, or just `angle` without a slot.
///
/// CNOT uses controls = {control}, targets = {target}. CZ is symmetric but is
/// stored the same way. A controlled unitary's body shares the parent's qubit
/// numbering; its `targets` list every qubit the body touches.
struct GateOp {
  GateKind kind = GateKind::kPauliX;
  std::vector<std::size_t> targets;
  std::vector<std::size_t> controls;
  std::optional<std::size_t> param_slot;
  double angle = 0.0;
  double scale = 1.0;
  std::shared_ptr<const CircuitDescription> body;
  std::shared_ptr<const Matrix> matrix;
};

struct CircuitDescription {
  std::size_t n_qubits = 0;
  std::vector<GateOp> ops;
  std::size_t n_param_slots = 0;

  CircuitDescription& add(GateOp op) {
    ops.push_back(std::move(op));
    return *this;
  }
  CircuitDescription& append(const CircuitDescription& other) {
    ops.insert(ops.end(), other.ops.begin(), other.ops.end());
    return *this;
  }
};

// ---------------------------------------------------------------------------
// Gate constructors

namespace gates {

inline GateOp rotation(GateKind kind, std::size_t q, std::size_t slot) {
  GateOp op;
  op.kind = kind;
  op.targets = {q};
  op.param_slot = slot;
  return op;
}
inline GateOp fixed_rotation(GateKind kind, std::size_t q, double angle) {
  GateOp op;
  op.kind = kind;
  op.targets = {q};
  op.angle = angle;
  return op;
}
inline GateOp rx(std::size_t q, std::size_t slot) { return rotation(GateKind::kRX, q, slot); }
inline GateOp ry(std::size_t q, std::size_t slot) { return rotation(GateKind::kRY, q, slot); }
inline GateOp rz(std::size_t q, std::size_t slot) { return rotation(GateKind::kRZ, q, slot); }
inline GateOp rx_fixed(std::size_t q, double a) { return fixed_rotation(GateKind::kRX, q, a); }
inline GateOp ry_fixed(std::size_t q, double a) { return fixed_rotation(GateKind::kRY, q, a); }
inline GateOp rz_fixed(std::size_t q, double a) { return fixed_rotation(GateKind::kRZ, q, a); }

inline GateOp single(GateKind kind, std::size_t q) {
  GateOp op;
  op.kind = kind;
  op.targets = {q};
  return op;
}
inline GateOp h(std::size_t q) { return single(GateKind::kHadamard, q); }
inline GateOp x(std::size_t q) { return single(GateKind::kPauliX, q); }
inline GateOp y(std::size_t q) { return single(GateKind::kPauliY, q); }
inline GateOp z(std::size_t q) { return single(GateKind::kPauliZ, q); }

inline GateOp cnot(std::size_t control, std::size_t target) {
  GateOp op;
  op.kind = GateKind::kCNOT;
  op.targets = {target};
  op.controls = {control};
  return op;
}
inline GateOp cz(std::size_t a, std::size_t b) {
  GateOp op;
  op.kind = GateKind::kCZ;
  op.targets = {b};
  op.controls = {a};
  return op;
}

inline GateOp global_phase(double angle) {
  GateOp op;
  op.kind = GateKind::kGlobalPhase;
  op.angle = angle;
  return op;
}

inline GateOp unitary(std::vector<std::size_t> targets, Matrix m) {
  GateOp op;
  op.kind = GateKind::kUnitary;
  op.targets = std::move(targets);
  op.matrix = std::make_shared<const Matrix>(std::move(m));
  return op;
}

/// Applies `body` only on the subspace where every control qubit is |1>.
inline GateOp controlled(std::vector<std::size_t> controls,
                         CircuitDescription body) {
  GateOp op;
  op.kind = GateKind::kControlledUnitary;
  op.controls = std::move(controls);
  std::vector<bool> touched(body.n_qubits, false);
  auto mark = [&](auto&& self, const CircuitDescription& c) -> void {
    for (const auto& g : c.ops) {
      for (auto q : g.targets) if (q < touched.size()) touched[q] = true;
      for (auto q : g.controls) if (q < touched.size()) touched[q] = true;
      if (g.body) self(self, *g.body);
    }
  };
  mark(mark, body);
  for (std::size_t q = 0; q < touched.size(); ++q)
    if (touched[q]) op.targets.push_back(q);
  op.body = std::make_shared<const CircuitDescription>(std::move(body));
  return op;
}

}  // namespace gates

// ---------------------------------------------------------------------------
// Kernels

namespace detail {

using Mat2 = std::array<Complex, 4>;  // row-major

inline Mat2 fixed_matrix(GateKind kind) {
  const double s = 1.0 / std::sqrt(2.0);
  const Complex i{0.0, 1.0};
  switch (kind) {
    case GateKind::kHadamard: return {s, s, s, -s};
    case GateKind::kPauliX:
    case GateKind::kCNOT: return {0.0, 1.0, 1.0, 0.0};
    case GateKind::kPauliY: return {0.0, -i, i, 0.0};
    case GateKind::kPauliZ:
    case GateKind::kCZ: return {1.0, 0.0, 0.0, -1.0};
    default: break;
  }
  throw Error(ErrorCode::kInvalidArgument, "gate has no fixed 2x2 matrix");
}

inline Mat2 rotation_matrix(GateKind kind, double theta) {
  const double c = std::cos(theta / 2.0);
  const double s = std::sin(theta / 2.0);
  switch (kind) {
    case GateKind::kRX: return {c, Complex{0.0, -s}, Complex{0.0, -s}, c};
    case GateKind::kRY: return {c, -s, s, c};
    case GateKind::kRZ: return {Complex{c, -s}, 0.0, 0.0, Complex{c, s}};
    default: break;
  }
  throw Error(ErrorCode::kInvalidArgument, "not a rotation gate");
}

inline double effective_angle(const GateOp& op, std::span<const double> params) {
  double theta = op.angle;
  if (op.param_slot) {
    QTST_REQUIRE(*op.param_slot < params.size(), ErrorCode::kMissingParam,
                 "param slot " + std::to_string(*op.param_slot) +
                     " with only " + std::to_string(params.size()) +
                     " parameters");
    theta += op.scale * params[*op.param_slot];
  }
  return theta;
}

inline void check_indices(const GateOp& op, std::size_t n_qubits) {
  for (auto q : op.targets)
    QTST_REQUIRE(q < n_qubits, ErrorCode::kIndexOutOfRange,
                 "target qubit " + std::to_string(q) + " >= " +
                     std::to_string(n_qubits));
  for (auto q : op.controls) {
    QTST_REQUIRE(q < n_qubits, ErrorCode::kIndexOutOfRange,
                 "control qubit " + std::to_string(q) + " >= " +
                     std::to_string(n_qubits));
    for (auto t : op.targets)
      QTST_REQUIRE(q != t, ErrorCode::kInvalidArgument,
                   "qubit " + std::to_string(q) + " is both control and target");
  }
}

inline void apply_2x2(std::span<Complex> v, std::size_t target,
                      std::size_t cmask, const Mat2& m) {
  const std::size_t tbit = std::size_t{1} << target;
  const std::size_t dim = v.size();
  for (std::size_t i = 0; i < dim; ++i) {
    if ((i & tbit) || (i & cmask) != cmask) continue;
    const Complex a = v[i];
    const Complex b = v[i | tbit];
    v[i] = m[0] * a + m[1] * b;
    v[i | tbit] = m[2] * a + m[3] * b;
  }
}

inline void apply_dense(std::span<Complex> v,
                        const std::vector<std::size_t>& targets,
                        std::size_t cmask, const Matrix& m) {
  const std::size_t k = targets.size();
  const std::size_t sub = std::size_t{1} << k;
  QTST_REQUIRE(static_cast<std::size_t>(m.rows()) == sub &&
                   static_cast<std::size_t>(m.cols()) == sub,
               ErrorCode::kDimensionMismatch, "dense gate matrix size");
  std::size_t tmask = 0;
  for (auto t : targets) tmask |= std::size_t{1} << t;
  std::vector<std::size_t> idx(sub);
  std::vector<Complex> in(sub);
  for (std::size_t base = 0; base < v.size(); ++base) {
    if ((base & tmask) || (base & cmask) != cmask) continue;
    for (std::size_t local = 0; local < sub; ++local) {
      std::size_t full = base;
      for (std::size_t j = 0; j < k; ++j)
        if (local >> j & 1U) full |= std::size_t{1} << targets[j];
      idx[local] = full;
      in[local] = v[full];
    }
    for (std::size_t r = 0; r < sub; ++r) {
      Complex acc{};
      for (std::size_t c = 0; c < sub; ++c) acc += m(r, c) * in[c];
      v[idx[r]] = acc;
    }
  }
}

/// In-place application with extra control mask and optional angle offset.
inline void apply(std::span<Complex> v, std::size_t n_qubits, const GateOp& op,
                  std::span<const double> params, std::size_t outer_cmask = 0,
                  double extra_angle = 0.0) {
  check_indices(op, n_qubits);
  std::size_t cmask = outer_cmask;
  for (auto c : op.controls) cmask |= std::size_t{1} << c;
  switch (op.kind) {
    case GateKind::kRX:
    case GateKind::kRY:
    case GateKind::kRZ:
      apply_2x2(v, op.targets.at(0), cmask,
                rotation_matrix(op.kind, effective_angle(op, params) + extra_angle));
      return;
    case GateKind::kHadamard:
    case GateKind::kPauliX:
    case GateKind::kPauliY:
    case GateKind::kPauliZ:
    case GateKind::kCNOT:
    case GateKind::kCZ:
      apply_2x2(v, op.targets.at(0), cmask, fixed_matrix(op.kind));
      return;
    case GateKind::kGlobalPhase: {
      const Complex phase =
          std::polar(1.0, effective_angle(op, params) + extra_angle);
      for (std::size_t i = 0; i < v.size(); ++i)
        if ((i & cmask) == cmask) v[i] *= phase;
      return;
    }
    case GateKind::kUnitary:
      QTST_REQUIRE(op.matrix != nullptr, ErrorCode::kInvalidArgument,
                   "unitary gate without matrix");
      apply_dense(v, op.targets, cmask, *op.matrix);
      return;
    case GateKind::kControlledUnitary:
      QTST_REQUIRE(op.body != nullptr, ErrorCode::kInvalidArgument,
                   "controlled unitary without body");
      for (const auto& inner : op.body->ops)
        apply(v, n_qubits, inner, params, cmask);
      return;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations

inline void apply_gate_inplace(Statevector& state, const GateOp& gate,
                               std::span<const double> params) {
  detail::apply(state.amplitudes(), state.n_qubits(), gate, params);
}

/// Returns `gate` applied to `state`.
inline Statevector apply_gate(Statevector state, const GateOp& gate,
                              std::span<const double> params = {}) {
  apply_gate_inplace(state, gate, params);
  return state;
}

inline void run_circuit_inplace(const CircuitDescription& circuit,
                                std::span<const double> params,
                                Statevector& state) {
  QTST_REQUIRE(state.n_qubits() == circuit.n_qubits,
               ErrorCode::kDimensionMismatch,
               "state has " + std::to_string(state.n_qubits()) +
                   " qubits, circuit has " + std::to_string(circuit.n_qubits));
  QTST_REQUIRE(params.size() >= circuit.n_param_slots, ErrorCode::kMissingParam,
               "circuit needs " + std::to_string(circuit.n_param_slots) +
                   " parameters, got " + std::to_string(params.size()));
  QTST_REQUIRE(params.size() == circuit.n_param_slots,
               ErrorCode::kDimensionMismatch, "too many parameters");
  for (const auto& op : circuit.ops)
    detail::apply(state.amplitudes(), state.n_qubits(), op, params);
}

inline Statevector run_circuit(const CircuitDescription& circuit,
                               std::span<const double> params,
                               Statevector initial) {
  run_circuit_inplace(circuit, params, initial);
  return initial;
}

inline Statevector run_circuit(const CircuitDescription& circuit,
                               std::span<const double> params = {}) {
  return run_circuit(circuit, params, Statevector(circuit.n_qubits));
}

/// Checks qubit indices and parameter slots of every op, recursively.
inline void validate(const CircuitDescription& circuit) {
  auto walk = [&](auto&& self, const CircuitDescription& c) -> void {
    for (const auto& op : c.ops) {
      detail::check_indices(op, circuit.n_qubits);
      if (op.param_slot)
        QTST_REQUIRE(*op.param_slot < circuit.n_param_slots,
                     ErrorCode::kMissingParam,
                     "param slot " + std::to_string(*op.param_slot) +
                         " >= n_param_slots " +
                         std::to_string(circuit.n_param_slots));
      if (op.body) self(self, *op.body);
    }
  };
  walk(walk, circuit);
}

inline constexpr std::size_t kMaxDenseQubits = 10;

/// Full 2^n x 2^n matrix of the bound circuit, column j = circuit |j>.
inline Matrix dense_unitary(const CircuitDescription& circuit,
                            std::span<const double> params = {}) {
  QTST_REQUIRE(circuit.n_qubits <= kMaxDenseQubits, ErrorCode::kTooLarge,
               std::to_string(circuit.n_qubits) + " qubits");
  const std::size_t dim = std::size_t{1} << circuit.n_qubits;
  Matrix u(dim, dim);
  for (std::size_t j = 0; j < dim; ++j) {
    auto col = run_circuit(circuit, params, Statevector::basis(circuit.n_qubits, j));
    for (std::size_t i = 0; i < dim; ++i) u(i, j) = col[i];
  }
  return u;
}

inline Complex inner_product(const Statevector& a, const Statevector& b) {
  QTST_REQUIRE(a.n_qubits() == b.n_qubits(), ErrorCode::kDimensionMismatch,
               "inner product of " + std::to_string(a.n_qubits()) + " and " +
                   std::to_string(b.n_qubits()) + " qubit states");
  Complex acc{};
  for (std::size_t i = 0; i < a.dim(); ++i) acc += std::conj(a[i]) * b[i];
  return acc;
}

inline double fidelity(const Statevector& a, const Statevector& b) {
  return std::norm(inner_product(a, b));
}

inline GateOp inverse(const GateOp& op) {
  GateOp inv = op;
  switch (op.kind) {
    case GateKind::kRX:
    case GateKind::kRY:
    case GateKind::kRZ:
    case GateKind::kGlobalPhase:
      inv.angle = -op.angle;
      inv.scale = -op.scale;
      break;
    case GateKind::kPauliY:  // Y is Hermitian; all fixed Paulis are involutions
    case GateKind::kHadamard:
    case GateKind::kPauliX:
    case GateKind::kPauliZ:
    case GateKind::kCNOT:
    case GateKind::kCZ:
      break;
    case GateKind::kUnitary:
      inv.matrix = std::make_shared<const Matrix>(op.matrix->adjoint());
      break;
    case GateKind::kControlledUnitary: {
      CircuitDescription body = *op.body;
      std::reverse(body.ops.begin(), body.ops.end());
      for (auto& g : body.ops) g = inverse(g);
      inv.body = std::make_shared<const CircuitDescription>(std::move(body));
      break;
    }
  }
  return inv;
}

/// The adjoint circuit; parameter slots are kept and negated.
inline CircuitDescription inverse(const CircuitDescription& circuit) {
  CircuitDescription inv;
  inv.n_qubits = circuit.n_qubits;
  inv.n_param_slots = circuit.n_param_slots;
  inv.ops.reserve(circuit.ops.size());
  for (auto it = circuit.ops.rbegin(); it != circuit.ops.rend(); ++it)
    inv.ops.push_back(inverse(*it));
  return inv;
}

/// Replaces every parameter slot by its bound value.
inline CircuitDescription bind_parameters(const CircuitDescription& circuit,
                               std::span<const double> params) {
  QTST_REQUIRE(params.size() >= circuit.n_param_slots, ErrorCode::kMissingParam,
               "bind_parameters needs " + std::to_string(circuit.n_param_slots) +
                   " parameters");
  CircuitDescription out;
  out.n_qubits = circuit.n_qubits;
  out.ops.reserve(circuit.ops.size());
  for (GateOp op : circuit.ops) {
    if (op.param_slot) {
      op.angle = detail::effective_angle(op, params);
      op.param_slot.reset();
      op.scale = 1.0;
    }
    if (op.body) {
      op.body = std::make_shared<const CircuitDescription>(bind_parameters(*op.body, params));
    }
    out.ops.push_back(std::move(op));
  }
  return out;
}

/// Relabels qubit q as mapping[q] inside a register of `n_qubits`.
inline CircuitDescription remap(const CircuitDescription& circuit,
                                std::span<const std::size_t> mapping,
                                std::size_t n_qubits) {
  QTST_REQUIRE(mapping.size() >= circuit.n_qubits, ErrorCode::kDimensionMismatch,
               "qubit mapping too short");
  CircuitDescription out;
  out.n_qubits = n_qubits;
  out.n_param_slots = circuit.n_param_slots;
  for (GateOp op : circuit.ops) {
    for (auto& q : op.targets) q = mapping[q];
    for (auto& q : op.controls) q = mapping[q];
    if (op.body) {
      op.body = std::make_shared<const CircuitDescription>(
          remap(*op.body, mapping, n_qubits));
    }
    out.ops.push_back(std::move(op));
  }
  return out;
}

/// Writes a dense matrix as CSV, each entry as a "real,imag" pair.
inline void write_unitary_csv(std::ostream& os, const Matrix& m) {
  os.precision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) os << ',';
      os << m(r, c).real() << ',' << m(r, c).imag();
    }
    os << '\n';
  }
}

}  // namespace qtst::qsim
