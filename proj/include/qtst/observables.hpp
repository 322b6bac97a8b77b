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
 * @file observables.hpp
 * Hermitian observables and their expectation values.
 *
 * A trainable observable H(h) on N = 2^n amplitudes is stored by its real
 * diagonal and complex strict upper triangle; the lower triangle is always
 * the conjugate, so H == H^dagger holds by construction.
 */
#pragma once

#include <span>
#include <string>
#include <vector>

#include "qtst/core.hpp"
#include "qtst/qsim.hpp"

namespace qtst::observables {

using qsim::Matrix;
using qsim::Statevector;

class HermitianObservable {
 public:
  HermitianObservable() = default;

  /// The zero observable on `n_qubits`.
  explicit HermitianObservable(std::size_t n_qubits)
      : n_qubits_(n_qubits),
        dim_(std::size_t{1} << n_qubits),
        diag_(dim_, 0.0),
        upper_(dim_ * (dim_ - 1) / 2, Complex{}) {}

  /// Reads the diagonal (real part) and upper triangle of `m`. The lower
  /// triangle of `m` is ignored.
  static HermitianObservable from_matrix(const Matrix& m) {
    const auto dim = static_cast<std::size_t>(m.rows());
    QTST_REQUIRE(m.rows() == m.cols() && dim > 0 &&
                     (std::size_t{1} << ceil_log2(dim)) == dim,
                 ErrorCode::kDimensionMismatch,
                 "observable matrix must be square with power-of-two size");
    HermitianObservable h(ceil_log2(dim));
    for (std::size_t i = 0; i < dim; ++i) {
      h.diag_[i] = m(i, i).real();
      for (std::size_t j = i + 1; j < dim; ++j) h.upper_[h.upper_index(i, j)] = m(i, j);
    }
    return h;
  }

  /// Pauli Z acting on `qubit`, identity elsewhere.
  static HermitianObservable pauli_z(std::size_t n_qubits, std::size_t qubit) {
    QTST_REQUIRE(qubit < n_qubits, ErrorCode::kIndexOutOfRange,
                 "pauli_z qubit " + std::to_string(qubit));
    HermitianObservable h(n_qubits);
    for (std::size_t i = 0; i < h.dim_; ++i) h.diag_[i] = (i >> qubit & 1U) ? -1.0 : 1.0;
    return h;
  }

  /// Entries drawn from a standard normal distribution.
  static HermitianObservable random(std::size_t n_qubits, Rng& rng) {
    HermitianObservable h(n_qubits);
    for (auto& d : h.diag_) d = normal(rng);
    for (auto& u : h.upper_) u = Complex(normal(rng), normal(rng));
    return h;
  }

  std::size_t n_qubits() const noexcept { return n_qubits_; }
  std::size_t dim() const noexcept { return dim_; }

  /// N^2 real parameters: N diagonal entries, then (re, im) of each upper
  /// entry in row-major order.
  std::size_t parameter_count() const noexcept { return dim_ * dim_; }

  std::vector<double> parameters() const {
    std::vector<double> p(diag_);
    p.reserve(parameter_count());
    for (const auto& u : upper_) {
      p.push_back(u.real());
      p.push_back(u.imag());
    }
    return p;
  }

  void set_parameters(std::span<const double> p) {
    QTST_REQUIRE(p.size() == parameter_count(), ErrorCode::kDimensionMismatch,
                 "expected " + std::to_string(parameter_count()) +
                     " observable parameters, got " + std::to_string(p.size()));
    for (std::size_t i = 0; i < dim_; ++i) diag_[i] = p[i];
    for (std::size_t k = 0; k < upper_.size(); ++k)
      upper_[k] = Complex(p[dim_ + 2 * k], p[dim_ + 2 * k + 1]);
  }

  Complex entry(std::size_t i, std::size_t j) const {
    if (i == j) return diag_[i];
    if (i < j) return upper_[upper_index(i, j)];
    return std::conj(upper_[upper_index(j, i)]);
  }

  Matrix matrix() const {
    Matrix m(dim_, dim_);
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = 0; j < dim_; ++j) m(i, j) = entry(i, j);
    return m;
  }

  HermitianObservable& operator+=(const HermitianObservable& o) {
    QTST_REQUIRE(o.dim_ == dim_, ErrorCode::kDimensionMismatch, "observable sum");
    for (std::size_t i = 0; i < dim_; ++i) diag_[i] += o.diag_[i];
    for (std::size_t k = 0; k < upper_.size(); ++k) upper_[k] += o.upper_[k];
    return *this;
  }
  HermitianObservable& operator*=(double a) {
    for (auto& d : diag_) d *= a;
    for (auto& u : upper_) u *= a;
    return *this;
  }
  friend HermitianObservable operator+(HermitianObservable a,
                                       const HermitianObservable& b) {
    return a += b;
  }
  friend HermitianObservable operator*(double a, HermitianObservable h) {
    return h *= a;
  }

 private:
  std::size_t upper_index(std::size_t i, std::size_t j) const {
    // Row-major strict upper triangle.
    return i * dim_ - i * (i + 1) / 2 + (j - i - 1);
  }

  std::size_t n_qubits_ = 0;
  std::size_t dim_ = 1;
  std::vector<double> diag_;
  std::vector<Complex> upper_;
};

/// One weighted Pauli product. `paulis[q]` is the letter acting on qubit q.
struct PauliTerm {
  double coefficient = 1.0;
  std::string paulis;
};

struct PauliStringObservable {
  std::size_t n_qubits = 0;
  std::vector<PauliTerm> terms;

  Matrix matrix() const;
};

namespace detail {

inline void check_term(const PauliTerm& term, std::size_t n_qubits) {
  QTST_REQUIRE(term.paulis.size() == n_qubits, ErrorCode::kDimensionMismatch,
               "Pauli string '" + term.paulis + "' on " +
                   std::to_string(n_qubits) + " qubits");
  for (char c : term.paulis)
    QTST_REQUIRE(c == 'I' || c == 'X' || c == 'Y' || c == 'Z',
                 ErrorCode::kInvalidArgument,
                 std::string("unknown Pauli letter '") + c + "'");
}

/// P|psi> for a single Pauli product.
inline Statevector apply_pauli(const PauliTerm& term, Statevector psi) {
  for (std::size_t q = 0; q < term.paulis.size(); ++q) {
    switch (term.paulis[q]) {
      case 'X': qsim::apply_gate_inplace(psi, qsim::gates::x(q), {}); break;
      case 'Y': qsim::apply_gate_inplace(psi, qsim::gates::y(q), {}); break;
      case 'Z': qsim::apply_gate_inplace(psi, qsim::gates::z(q), {}); break;
      default: break;
    }
  }
  return psi;
}

}  // namespace detail

inline Matrix PauliStringObservable::matrix() const {
  const std::size_t dim = std::size_t{1} << n_qubits;
  Matrix m = Matrix::Zero(dim, dim);
  for (const auto& term : terms) {
    detail::check_term(term, n_qubits);
    for (std::size_t j = 0; j < dim; ++j) {
      auto col = detail::apply_pauli(term, Statevector::basis(n_qubits, j));
      for (std::size_t i = 0; i < dim; ++i) m(i, j) += term.coefficient * col[i];
    }
  }
  return m;
}

/// <psi|H|psi> without discarding the imaginary part.
inline Complex expectation_complex(const HermitianObservable& obs,
                                   const Statevector& psi) {
  QTST_REQUIRE(obs.dim() == psi.dim(), ErrorCode::kDimensionMismatch,
               "observable on " + std::to_string(obs.n_qubits()) +
                   " qubits, state on " + std::to_string(psi.n_qubits()));
  Complex acc{};
  for (std::size_t i = 0; i < psi.dim(); ++i) {
    Complex row{};
    for (std::size_t j = 0; j < psi.dim(); ++j) row += obs.entry(i, j) * psi[j];
    acc += std::conj(psi[i]) * row;
  }
  return acc;
}

inline Complex expectation_complex(const PauliStringObservable& obs,
                                   const Statevector& psi) {
  QTST_REQUIRE(obs.n_qubits == psi.n_qubits(), ErrorCode::kDimensionMismatch,
               "Pauli observable on " + std::to_string(obs.n_qubits) +
                   " qubits, state on " + std::to_string(psi.n_qubits()));
  Complex acc{};
  for (const auto& term : obs.terms) {
    detail::check_term(term, obs.n_qubits);
    acc += term.coefficient *
           qsim::inner_product(psi, detail::apply_pauli(term, psi));
  }
  return acc;
}

template <class Observable>
double expectation(const Observable& obs, const Statevector& psi) {
  return expectation_complex(obs, psi).real();
}

/// d<H>/dh_kl = <psi|E_kl|psi> = conj(psi_k) psi_l, for every (k, l).
inline Matrix expectation_grad_entries(const HermitianObservable& obs,
                                       const Statevector& psi) {
  QTST_REQUIRE(obs.dim() == psi.dim(), ErrorCode::kDimensionMismatch,
               "gradient of observable on " + std::to_string(obs.n_qubits()) +
                   " qubits, state on " + std::to_string(psi.n_qubits()));
  Matrix g(psi.dim(), psi.dim());
  for (std::size_t k = 0; k < psi.dim(); ++k)
    for (std::size_t l = 0; l < psi.dim(); ++l) g(k, l) = std::conj(psi[k]) * psi[l];
  return g;
}

/// Gradient of <H> with respect to the real parameter vector of `obs`
/// (layout of HermitianObservable::parameters()).
inline std::vector<double> expectation_grad_parameters(
    const HermitianObservable& obs, const Statevector& psi) {
  const Matrix g = expectation_grad_entries(obs, psi);
  const std::size_t dim = obs.dim();
  std::vector<double> out;
  out.reserve(obs.parameter_count());
  for (std::size_t i = 0; i < dim; ++i) out.push_back(g(i, i).real());
  // h_ij = x + iy enters as h_ij E_ij + conj(h_ij) E_ji.
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i + 1; j < dim; ++j) {
      out.push_back(2.0 * g(i, j).real());
      out.push_back(-2.0 * g(i, j).imag());
    }
  }
  return out;
}

}  // namespace qtst::observables
