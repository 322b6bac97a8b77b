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
 * @file model.hpp
 * Quantum time-series transformer.
 *
 * Pipeline for one sample (T x R series):
 *   1. window-average to L timesteps, project x_t -> e_t = A x_t + a0
 *   2. angles_t = e_t W_E + Theta drive the ansatz unitary U_t
 *   3. M = sum_t b_t U_t with b = raw / max(1, |raw|_1)
 *   4. phi = P(M)|0> = sum_k c_k M^k |0>, chi = phi / |phi|
 *   5. out = U_FF chi, z_k = <out|H_k|out>, y = w . z + w0
 *
 * Step 4 is the postselected branch of the LCU / polynomial block encoding
 * (see lcu.hpp, qsvt.hpp), evaluated directly on the data register.
 */
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "qtst/core.hpp"
#include "qtst/dataio.hpp"
#include "qtst/lcu.hpp"
#include "qtst/metrics.hpp"
#include "qtst/observables.hpp"
#include "qtst/parallel.hpp"
#include "qtst/qsim.hpp"
#include "qtst/qsvt.hpp"

namespace qtst::model {

using metrics::Task;
using observables::HermitianObservable;
using qsim::CircuitDescription;
using qsim::Statevector;

enum class ObservableMode { kPauliZ, kTrainableHermitian };

inline constexpr std::size_t kMaxTotalQubits = 16;

struct ModelConfig {
  std::size_t n_data_qubits = 4;
  std::size_t ansatz_layers = 2;
  std::size_t seq_len = 8;
  std::size_t input_dim = 8;
  std::size_t embed_dim = 16;
  std::size_t poly_degree = 2;
  std::size_t n_outputs = 4;
  std::size_t ff_layers = 1;
  Task task = Task::kBinaryClassification;
  ObservableMode observable_mode = ObservableMode::kPauliZ;

  std::size_t angle_count() const { return 2 * n_data_qubits * ansatz_layers; }
  std::size_t ff_angle_count() const { return 2 * n_data_qubits * ff_layers; }
  std::size_t dim() const { return std::size_t{1} << n_data_qubits; }

  /// Width of the full block-encoding circuit this model stands for.
  std::size_t total_qubits() const {
    return qsvt::polynomial_circuit_width(n_data_qubits, seq_len, poly_degree);
  }

  void validate() const {
    QTST_REQUIRE(n_data_qubits >= 1 && ansatz_layers >= 1 && seq_len >= 1 && input_dim >= 1 &&
                     embed_dim >= 1 && n_outputs >= 1,
                 ErrorCode::kConfigError, "model dimensions must be >= 1");
    QTST_REQUIRE(poly_degree >= 1 && poly_degree <= qsvt::kMaxDegree,
                 ErrorCode::kDegreeTooLarge,
                 "poly_degree must be in [1, " + std::to_string(qsvt::kMaxDegree) + "]");
    QTST_REQUIRE(total_qubits() <= kMaxTotalQubits, ErrorCode::kTooLarge,
                 "model needs " + std::to_string(total_qubits()) + " qubits (limit " +
                     std::to_string(kMaxTotalQubits) + ")");
    if (observable_mode == ObservableMode::kPauliZ)
      QTST_REQUIRE(n_outputs <= n_data_qubits, ErrorCode::kConfigError,
                   "pauli_z readout supports at most one output per data qubit");
  }
};

/// `layers` x [RY(q), RZ(q) for each qubit, then a CNOT ring]. Slot 2(l n + q)
/// is the RY angle and slot 2(l n + q) + 1 the RZ angle of qubit q in layer l.
inline CircuitDescription ansatz(std::size_t n_qubits, std::size_t layers) {
  using namespace qsim::gates;
  CircuitDescription c;
  c.n_qubits = n_qubits;
  c.n_param_slots = 2 * n_qubits * layers;
  for (std::size_t l = 0; l < layers; ++l) {
    for (std::size_t q = 0; q < n_qubits; ++q) {
      c.add(ry(q, 2 * (l * n_qubits + q)));
      c.add(rz(q, 2 * (l * n_qubits + q) + 1));
    }
    for (std::size_t q = 0; q + 1 < n_qubits; ++q) c.add(cnot(q, q + 1));
    if (n_qubits >= 3) c.add(cnot(n_qubits - 1, 0));
  }
  return c;
}

/// Trainable scalars of a circuit fragment.
inline std::size_t count_parameters(const CircuitDescription& c) { return c.n_param_slots; }

/// Offsets of each parameter block in the flat parameter vector.
struct ParamLayout {
  std::size_t projection, projection_bias, w_e, theta, lcu, poly, ff, observables, head, head_bias,
      total;

  explicit ParamLayout(const ModelConfig& c) {
    std::size_t o = 0;
    auto take = [&o](std::size_t n) {
      const std::size_t at = o;
      o += n;
      return at;
    };
    projection = take(c.embed_dim * c.input_dim);
    projection_bias = take(c.embed_dim);
    w_e = take(c.embed_dim * c.angle_count());
    theta = take(c.angle_count());
    lcu = take(2 * c.seq_len);
    poly = take(2 * (c.poly_degree + 1));
    ff = take(c.ff_angle_count());
    observables = take(c.observable_mode == ObservableMode::kTrainableHermitian
                           ? c.n_outputs * c.dim() * c.dim()
                           : 0);
    head = take(c.n_outputs);
    head_bias = take(1);
    total = o;
  }
};

/// Exact number of trainable real scalars (complex values count as 2).
inline std::size_t count_parameters(const ModelConfig& c) { return ParamLayout(c).total; }

struct ModelParams {
  /// embed_dim x input_dim.
  Eigen::MatrixXd projection;
  Eigen::VectorXd projection_bias;
  /// embed_dim x angle_count.
  Eigen::MatrixXd w_e;
  Eigen::VectorXd theta;
  std::vector<Complex> lcu_raw_weights;
  std::vector<Complex> poly_coeffs;
  Eigen::VectorXd ff_angles;
  /// One per output; empty in Pauli-Z mode.
  std::vector<HermitianObservable> observables;
  Eigen::VectorXd head;
  double head_bias = 0.0;

  static ModelParams zeros(const ModelConfig& c) {
    ModelParams p;
    p.projection = Eigen::MatrixXd::Zero(c.embed_dim, c.input_dim);
    p.projection_bias = Eigen::VectorXd::Zero(c.embed_dim);
    p.w_e = Eigen::MatrixXd::Zero(c.embed_dim, c.angle_count());
    p.theta = Eigen::VectorXd::Zero(c.angle_count());
    p.lcu_raw_weights.assign(c.seq_len, Complex{});
    p.poly_coeffs.assign(c.poly_degree + 1, Complex{});
    p.ff_angles = Eigen::VectorXd::Zero(c.ff_angle_count());
    if (c.observable_mode == ObservableMode::kTrainableHermitian)
      p.observables.assign(c.n_outputs, HermitianObservable(c.n_data_qubits));
    p.head = Eigen::VectorXd::Zero(c.n_outputs);
    return p;
  }

  /// Angles U(-0.1, 0.1), projection U(-1/sqrt(R), 1/sqrt(R)), equal LCU
  /// weights 1/L, identity polynomial, Z_k observables, zero head.
  static ModelParams init(const ModelConfig& c, Rng& rng) {
    c.validate();
    ModelParams p = zeros(c);
    const double bound = 1.0 / std::sqrt(static_cast<double>(c.input_dim));
    for (Eigen::Index i = 0; i < p.projection.size(); ++i)
      p.projection.data()[i] = uniform(rng, -bound, bound);
    for (Eigen::Index i = 0; i < p.w_e.size(); ++i) p.w_e.data()[i] = uniform(rng, -0.1, 0.1);
    for (auto& t : p.theta) t = uniform(rng, -0.1, 0.1);
    for (auto& t : p.ff_angles) t = uniform(rng, -0.1, 0.1);
    for (auto& w : p.lcu_raw_weights) w = 1.0 / static_cast<double>(c.seq_len);
    p.poly_coeffs[1] = 1.0;
    for (std::size_t k = 0; k < p.observables.size(); ++k)
      p.observables[k] = HermitianObservable::pauli_z(c.n_data_qubits, k % c.n_data_qubits);
    return p;
  }

  std::vector<double> flatten(const ModelConfig& c) const {
    const ParamLayout lay(c);
    std::vector<double> v(lay.total);
    auto put_matrix = [&](std::size_t at, const Eigen::MatrixXd& m) {
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) v[at++] = m(i, j);
    };
    auto put_complex = [&](std::size_t at, const std::vector<Complex>& z) {
      for (const auto& x : z) {
        v[at++] = x.real();
        v[at++] = x.imag();
      }
    };
    put_matrix(lay.projection, projection);
    put_matrix(lay.projection_bias, projection_bias);
    put_matrix(lay.w_e, w_e);
    put_matrix(lay.theta, theta);
    put_complex(lay.lcu, lcu_raw_weights);
    put_complex(lay.poly, poly_coeffs);
    put_matrix(lay.ff, ff_angles);
    std::size_t at = lay.observables;
    for (const auto& h : observables)
      for (double x : h.parameters()) v[at++] = x;
    put_matrix(lay.head, head);
    v[lay.head_bias] = head_bias;
    return v;
  }

  static ModelParams unflatten(const ModelConfig& c, std::span<const double> v) {
    const ParamLayout lay(c);
    QTST_REQUIRE(v.size() == lay.total, ErrorCode::kDimensionMismatch,
                 "expected " + std::to_string(lay.total) + " parameters, got " +
                     std::to_string(v.size()));
    for (double x : v)
      QTST_REQUIRE(std::isfinite(x), ErrorCode::kNonFinite, "non-finite parameter");
    ModelParams p = zeros(c);
    auto get_matrix = [&](std::size_t at, auto& m) {
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = v[at++];
    };
    auto get_complex = [&](std::size_t at, std::vector<Complex>& z) {
      for (auto& x : z) {
        x = Complex(v[at], v[at + 1]);
        at += 2;
      }
    };
    get_matrix(lay.projection, p.projection);
    get_matrix(lay.projection_bias, p.projection_bias);
    get_matrix(lay.w_e, p.w_e);
    get_matrix(lay.theta, p.theta);
    get_complex(lay.lcu, p.lcu_raw_weights);
    get_complex(lay.poly, p.poly_coeffs);
    get_matrix(lay.ff, p.ff_angles);
    const std::size_t per = c.dim() * c.dim();
    for (std::size_t k = 0; k < p.observables.size(); ++k)
      p.observables[k].set_parameters(v.subspan(lay.observables + k * per, per));
    get_matrix(lay.head, p.head);
    p.head_bias = v[lay.head_bias];
    return p;
  }
};

struct Prediction {
  std::vector<double> expectations;
  /// Logit (classification) or predicted value (regression).
  double output = 0.0;
  double lcu_success_prob = 0.0;
  double poly_success_prob = 0.0;
};

/// Maps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

/// embeddings (L x embed_dim) times W_E (embed_dim x angle_count).
inline Eigen::MatrixXd embed_to_angles(const Eigen::MatrixXd& embeddings, const Eigen::MatrixXd& w_e,
                                       bool wrap = false) {
  QTST_REQUIRE(embeddings.cols() == w_e.rows(), ErrorCode::kShapeMismatch,
               "embedding width " + std::to_string(embeddings.cols()) + " vs W_E rows " +
                   std::to_string(w_e.rows()));
  Eigen::MatrixXd a = embeddings * w_e;
  if (wrap) a = a.unaryExpr([](double x) { return wrap_angle(x); });
  return a;
}

namespace detail {

using Vec = Eigen::VectorXcd;

inline Eigen::Map<const Vec> view(const Statevector& s) {
  return {s.amplitudes().data(), static_cast<Eigen::Index>(s.dim())};
}

inline Statevector from_vec(const Vec& v) {
  return Statevector::from_amplitudes(std::vector<Complex>(v.data(), v.data() + v.size()));
}

/// Circuits and precomputed inverses shared by every sample.
struct Circuits {
  CircuitDescription unit;
  CircuitDescription unit_inverse;
  CircuitDescription ff;
  CircuitDescription ff_inverse;

  explicit Circuits(const ModelConfig& c)
      : unit(ansatz(c.n_data_qubits, c.ansatz_layers)),
        unit_inverse(qsim::inverse(unit)),
        ff(c.ff_layers ? ansatz(c.n_data_qubits, c.ff_layers) : CircuitDescription{c.n_data_qubits, {}, 0}),
        ff_inverse(qsim::inverse(ff)) {}
};

/// Observable matrices H_k in the configured readout mode.
inline std::vector<qsim::Matrix> readout(const ModelConfig& c, const ModelParams& p) {
  std::vector<qsim::Matrix> h;
  for (std::size_t k = 0; k < c.n_outputs; ++k) {
    if (c.observable_mode == ObservableMode::kPauliZ)
      h.push_back(HermitianObservable::pauli_z(c.n_data_qubits, k).matrix());
    else
      h.push_back(p.observables.at(k).matrix());
  }
  return h;
}

struct Cache {
  Eigen::MatrixXd x;       // L x input_dim
  Eigen::MatrixXd e;       // L x embed_dim
  std::vector<std::vector<double>> angles;  // per timestep, Theta included
  lcu::NormalizedWeights b;
  std::vector<Statevector> u;  // M^k |0>, k = 0..d
  Vec phi;
  double phi_norm = 0.0;
  Vec chi;
  Statevector out;
  std::vector<qsim::Matrix> h;
  Prediction pred;
};

inline void check_shapes(const ModelConfig& c, const ModelParams& p) {
  QTST_REQUIRE(p.projection.rows() == static_cast<Eigen::Index>(c.embed_dim) &&
                   p.projection.cols() == static_cast<Eigen::Index>(c.input_dim) &&
                   p.projection_bias.size() == static_cast<Eigen::Index>(c.embed_dim) &&
                   p.w_e.rows() == static_cast<Eigen::Index>(c.embed_dim) &&
                   p.w_e.cols() == static_cast<Eigen::Index>(c.angle_count()) &&
                   p.theta.size() == static_cast<Eigen::Index>(c.angle_count()) &&
                   p.lcu_raw_weights.size() == c.seq_len &&
                   p.poly_coeffs.size() == c.poly_degree + 1 &&
                   p.ff_angles.size() == static_cast<Eigen::Index>(c.ff_angle_count()) &&
                   p.head.size() == static_cast<Eigen::Index>(c.n_outputs),
               ErrorCode::kShapeMismatch, "parameters do not match the model config");
}

/// M v = sum_t b_t U_t v.
inline Statevector apply_mixing(const Circuits& circ, const std::vector<std::vector<double>>& angles,
                                const std::vector<Complex>& b, const Statevector& v) {
  Vec acc = Vec::Zero(static_cast<Eigen::Index>(v.dim()));
  for (std::size_t t = 0; t < b.size(); ++t) {
    if (b[t] == Complex{}) continue;
    acc += b[t] * view(qsim::run_circuit(circ.unit, angles[t], v));
  }
  return from_vec(acc);
}

/// M^dagger v = sum_t conj(b_t) U_t^dagger v.
inline Statevector apply_mixing_adjoint(const Circuits& circ,
                                        const std::vector<std::vector<double>>& angles,
                                        const std::vector<Complex>& b, const Statevector& v) {
  Vec acc = Vec::Zero(static_cast<Eigen::Index>(v.dim()));
  for (std::size_t t = 0; t < b.size(); ++t) {
    if (b[t] == Complex{}) continue;
    acc += std::conj(b[t]) * view(qsim::run_circuit(circ.unit_inverse, angles[t], v));
  }
  return from_vec(acc);
}

inline Cache run_forward(const ModelConfig& c, const ModelParams& p, const Circuits& circ,
                         const Eigen::MatrixXd& series, const std::string& sample_id) {
  check_shapes(c, p);
  QTST_REQUIRE(series.cols() == static_cast<Eigen::Index>(c.input_dim), ErrorCode::kShapeMismatch,
               "sample '" + sample_id + "' has " + std::to_string(series.cols()) +
                   " features, model expects " + std::to_string(c.input_dim));
  Cache k;
  k.x = dataio::segment(series, c.seq_len);
  k.e = (k.x * p.projection.transpose()).rowwise() + p.projection_bias.transpose();
  const Eigen::MatrixXd a = embed_to_angles(k.e, p.w_e);
  k.angles.resize(c.seq_len);
  for (std::size_t t = 0; t < c.seq_len; ++t) {
    k.angles[t].resize(c.angle_count());
    for (std::size_t s = 0; s < c.angle_count(); ++s)
      k.angles[t][s] = a(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s)) +
                       p.theta(static_cast<Eigen::Index>(s));
  }
  k.b = lcu::normalize_weights(p.lcu_raw_weights);

  k.u.reserve(c.poly_degree + 1);
  k.u.emplace_back(c.n_data_qubits);
  for (std::size_t m = 0; m < c.poly_degree; ++m)
    k.u.push_back(apply_mixing(circ, k.angles, k.b.weights, k.u.back()));
  k.phi = Vec::Zero(static_cast<Eigen::Index>(c.dim()));
  for (std::size_t j = 0; j <= c.poly_degree; ++j) k.phi += p.poly_coeffs[j] * view(k.u[j]);

  const double alpha = lcu::l1_norm(k.b.weights);
  double alpha_p = 0.0;
  for (std::size_t j = 0; j <= c.poly_degree; ++j)
    alpha_p += std::abs(p.poly_coeffs[j]) * std::pow(alpha, static_cast<double>(j));
  const double phi_sq = k.phi.squaredNorm();
  k.pred.lcu_success_prob = k.u[1].squared_norm() / (alpha * alpha);
  k.pred.poly_success_prob = alpha_p > 0.0 ? phi_sq / (alpha_p * alpha_p) : 0.0;
  QTST_REQUIRE(phi_sq > 0.0 && k.pred.poly_success_prob >= lcu::kMinSuccessProb,
               ErrorCode::kPostselectionImpossible,
               "sample '" + sample_id + "': postselection probability " +
                   std::to_string(k.pred.poly_success_prob));
  k.phi_norm = std::sqrt(phi_sq);
  k.chi = k.phi / k.phi_norm;
  k.out = qsim::run_circuit(circ.ff, std::vector<double>(p.ff_angles.data(), p.ff_angles.data() + p.ff_angles.size()),
                            from_vec(k.chi));

  k.h = readout(c, p);
  const auto o = view(k.out);
  k.pred.output = p.head_bias;
  for (std::size_t j = 0; j < c.n_outputs; ++j) {
    const double z = o.dot(k.h[j] * o).real();
    QTST_REQUIRE(std::isfinite(z), ErrorCode::kNonFinite,
                 "sample '" + sample_id + "': non-finite expectation");
    k.pred.expectations.push_back(z);
    k.pred.output += p.head(static_cast<Eigen::Index>(j)) * z;
  }
  return k;
}

/// <bra|U|ket> and d<bra|U|ket>/d(slot) for every slot of U, by one reverse
/// sweep using dR(t)/dt = R(t + pi) / 2. Derivatives are added to `d`.
inline Complex adjoint_sweep(const CircuitDescription& circuit, std::span<const double> params,
                             Statevector ket, Statevector bra, std::span<Complex> d) {
  qsim::run_circuit_inplace(circuit, params, ket);
  const Complex value = qsim::inner_product(bra, ket);
  const std::size_t n = circuit.n_qubits;
  Statevector shifted(n);
  for (auto it = circuit.ops.rbegin(); it != circuit.ops.rend(); ++it) {
    const qsim::GateOp inv = qsim::inverse(*it);
    qsim::detail::apply(ket.amplitudes(), n, inv, params);
    if (it->param_slot) {
      shifted = ket;
      qsim::detail::apply(shifted.amplitudes(), n, *it, params, 0, kPi);
      d[*it->param_slot] += 0.5 * it->scale * qsim::inner_product(bra, shifted);
    }
    qsim::detail::apply(bra.amplitudes(), n, inv, params);
  }
  return value;
}

/// Adds d(loss)/d(params) for one sample to `grad`; returns the loss.
inline double accumulate_gradient(const ModelConfig& c, const ModelParams& p, const Circuits& circ,
                                  const dataio::TimeSeriesSample& sample, std::span<double> grad) {
  const ParamLayout lay(c);
  const Cache k = run_forward(c, p, circ, sample.series, sample.subject_id);
  const double y = k.pred.output;
  const double loss = metrics::loss(c.task, y, sample.label);
  const double g = metrics::loss_grad(c.task, y, sample.label);

  // Head.
  for (std::size_t j = 0; j < c.n_outputs; ++j) grad[lay.head + j] += g * k.pred.expectations[j];
  grad[lay.head_bias] += g;

  // O = sum_k dL/dz_k H_k.
  const auto dim = static_cast<Eigen::Index>(c.dim());
  qsim::Matrix o_mat = qsim::Matrix::Zero(dim, dim);
  for (std::size_t j = 0; j < c.n_outputs; ++j) o_mat += (g * p.head(static_cast<Eigen::Index>(j))) * k.h[j];
  if (c.observable_mode == ObservableMode::kTrainableHermitian) {
    const std::size_t per = c.dim() * c.dim();
    for (std::size_t j = 0; j < c.n_outputs; ++j) {
      const double dz = g * p.head(static_cast<Eigen::Index>(j));
      const auto gh = observables::expectation_grad_parameters(p.observables[j], k.out);
      for (std::size_t i = 0; i < per; ++i) grad[lay.observables + j * per + i] += dz * gh[i];
    }
  }

  // U_FF angles: +-pi/2 shift of <O>.
  std::vector<double> ff(p.ff_angles.data(), p.ff_angles.data() + p.ff_angles.size());
  const Statevector chi_state = from_vec(k.chi);
  auto expect_o = [&](const std::vector<double>& angles) {
    const Statevector s = qsim::run_circuit(circ.ff, angles, chi_state);
    const auto v = view(s);
    return v.dot(o_mat * v).real();
  };
  for (std::size_t s = 0; s < ff.size(); ++s) {
    const double keep = ff[s];
    ff[s] = keep + kPi / 2;
    const double plus = expect_o(ff);
    ff[s] = keep - kPi / 2;
    const double minus = expect_o(ff);
    ff[s] = keep;
    grad[lay.ff + s] += 0.5 * (plus - minus);
  }

  // Back through U_FF and the normalization of phi.
  const Vec o_out = o_mat * view(k.out);
  const Vec lam_chi = view(qsim::run_circuit(circ.ff_inverse, ff, from_vec(o_out)));
  const double f = view(k.out).dot(o_out).real();
  const Vec lam = (lam_chi - f * k.chi) / k.phi_norm;

  // Polynomial coefficients: dL = 2 Re <lam|dphi>.
  for (std::size_t j = 0; j <= c.poly_degree; ++j) {
    const Complex ip = lam.dot(view(k.u[j]));
    grad[lay.poly + 2 * j] += 2.0 * ip.real();
    grad[lay.poly + 2 * j + 1] += -2.0 * ip.imag();
  }

  // dphi = sum_k c_k sum_{j+m=k-1} M^j dM M^m |0>. With v_j = (M^dagger)^j lam and
  // w_m = sum_j conj(c_{j+m+1}) v_j, dL = 2 Re sum_m <w_m|dM|u_m>.
  const std::size_t d = c.poly_degree;
  std::vector<Statevector> v;
  v.push_back(from_vec(lam));
  for (std::size_t j = 1; j < d; ++j)
    v.push_back(apply_mixing_adjoint(circ, k.angles, k.b.weights, v.back()));
  std::vector<Statevector> w;
  for (std::size_t m = 0; m < d; ++m) {
    Vec acc = Vec::Zero(dim);
    for (std::size_t j = 0; j + m + 1 <= d; ++j) acc += std::conj(p.poly_coeffs[j + m + 1]) * view(v[j]);
    w.push_back(from_vec(acc));
  }

  const std::size_t n_angles = c.angle_count();
  Eigen::MatrixXd d_angles = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(c.seq_len),
                                                   static_cast<Eigen::Index>(n_angles));
  std::vector<Complex> d_b(c.seq_len);
  std::vector<Complex> d_unit(n_angles);
  for (std::size_t t = 0; t < c.seq_len; ++t) {
    std::fill(d_unit.begin(), d_unit.end(), Complex{});
    Complex s_t{};
    for (std::size_t m = 0; m < d; ++m)
      s_t += adjoint_sweep(circ.unit, k.angles[t], k.u[m], w[m], d_unit);
    d_b[t] = s_t;
    for (std::size_t s = 0; s < n_angles; ++s)
      d_angles(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s)) =
          2.0 * (k.b.weights[t] * d_unit[s]).real();
  }

  // b = raw / max(1, |raw|_1). Real-coordinate gradient of b is (2 Re S, -2 Im S).
  std::vector<double> g_b(2 * c.seq_len);
  for (std::size_t t = 0; t < c.seq_len; ++t) {
    g_b[2 * t] = 2.0 * d_b[t].real();
    g_b[2 * t + 1] = -2.0 * d_b[t].imag();
  }
  const double scale = k.b.scale;
  if (lcu::l1_norm(p.lcu_raw_weights) <= 1.0) {
    for (std::size_t i = 0; i < g_b.size(); ++i) grad[lay.lcu + i] += g_b[i];
  } else {
    double inner = 0.0;
    for (std::size_t t = 0; t < c.seq_len; ++t)
      inner += g_b[2 * t] * p.lcu_raw_weights[t].real() + g_b[2 * t + 1] * p.lcu_raw_weights[t].imag();
    for (std::size_t t = 0; t < c.seq_len; ++t) {
      const Complex r = p.lcu_raw_weights[t];
      const double mag = std::abs(r);
      const double ds_re = mag > 0.0 ? r.real() / mag : 0.0;
      const double ds_im = mag > 0.0 ? r.imag() / mag : 0.0;
      grad[lay.lcu + 2 * t] += g_b[2 * t] / scale - inner / (scale * scale) * ds_re;
      grad[lay.lcu + 2 * t + 1] += g_b[2 * t + 1] / scale - inner / (scale * scale) * ds_im;
    }
  }

  // angles = (X A^T + a0) W_E + Theta.
  const Eigen::VectorXd d_theta = d_angles.colwise().sum().transpose();
  const Eigen::MatrixXd d_we = k.e.transpose() * d_angles;
  const Eigen::MatrixXd d_e = d_angles * p.w_e.transpose();
  const Eigen::MatrixXd d_proj = d_e.transpose() * k.x;
  const Eigen::VectorXd d_bias = d_e.colwise().sum().transpose();
  for (std::size_t s = 0; s < n_angles; ++s) grad[lay.theta + s] += d_theta(static_cast<Eigen::Index>(s));
  for (Eigen::Index i = 0; i < d_we.rows(); ++i)
    for (Eigen::Index s = 0; s < d_we.cols(); ++s)
      grad[lay.w_e + static_cast<std::size_t>(i * d_we.cols() + s)] += d_we(i, s);
  for (Eigen::Index i = 0; i < d_proj.rows(); ++i) {
    for (Eigen::Index r = 0; r < d_proj.cols(); ++r)
      grad[lay.projection + static_cast<std::size_t>(i * d_proj.cols() + r)] += d_proj(i, r);
    grad[lay.projection_bias + static_cast<std::size_t>(i)] += d_bias(i);
  }
  return loss;
}

}  // namespace detail

inline Prediction forward(const ModelConfig& c, const ModelParams& p, const Eigen::MatrixXd& series,
                          const std::string& sample_id = "") {
  return detail::run_forward(c, p, detail::Circuits(c), series, sample_id).pred;
}

inline Prediction forward(const ModelConfig& c, const ModelParams& p,
                          const dataio::TimeSeriesSample& sample) {
  return forward(c, p, sample.series, sample.subject_id);
}

inline double loss(const Prediction& pred, double target, Task task) {
  return metrics::loss(task, pred.output, target);
}

struct BatchGradient {
  double loss = 0.0;
  /// Flat layout of ModelParams::flatten.
  std::vector<double> grad;
};

/// Mean loss and its gradient over `batch`. Per-sample gradients may be
/// computed in parallel; they are summed in batch order.
inline BatchGradient gradient(const ModelConfig& c, const ModelParams& p,
                              std::span<const dataio::TimeSeriesSample> batch) {
  QTST_REQUIRE(!batch.empty(), ErrorCode::kDataEmpty, "empty batch");
  const std::size_t n = count_parameters(c);
  const detail::Circuits circ(c);
  std::vector<std::vector<double>> per(batch.size(), std::vector<double>(n, 0.0));
  std::vector<double> losses(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) {
    losses[i] = detail::accumulate_gradient(c, p, circ, batch[i], per[i]);
  });
  BatchGradient out;
  out.grad.assign(n, 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.loss += losses[i];
    for (std::size_t j = 0; j < n; ++j) out.grad[j] += per[i][j];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv;
  for (auto& x : out.grad) x *= inv;
  return out;
}

/// Adapter used by the generic training loop (train.hpp).
class QuantumModel {
 public:
  QuantumModel(ModelConfig config, ModelParams params)
      : config_(std::move(config)), params_(std::move(params)), circuits_(config_) {
    config_.validate();
    detail::check_shapes(config_, params_);
  }

  static QuantumModel initialized(const ModelConfig& config, std::uint64_t seed) {
    Rng rng = substream(seed, "init");
    return QuantumModel(config, ModelParams::init(config, rng));
  }

  const ModelConfig& config() const { return config_; }
  const ModelParams& params() const { return params_; }
  Task task() const { return config_.task; }
  std::size_t parameter_count() const { return count_parameters(config_); }

  std::vector<double> parameters() const { return params_.flatten(config_); }
  void set_parameters(std::span<const double> v) { params_ = ModelParams::unflatten(config_, v); }

  double predict(const Eigen::MatrixXd& series, const std::string& id = "") const {
    return detail::run_forward(config_, params_, circuits_, series, id).pred.output;
  }

  double accumulate_gradient(const dataio::TimeSeriesSample& s, std::span<double> grad) const {
    return detail::accumulate_gradient(config_, params_, circuits_, s, grad);
  }

 private:
  ModelConfig config_;
  ModelParams params_;
  detail::Circuits circuits_;
};

}  // namespace qtst::model
