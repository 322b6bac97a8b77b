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
#include "qtst/model.hpp"

#include <cstdlib>

#include "gtest/gtest.h"
#include "model_oracle.hpp"
#include "oracles.hpp"

namespace qtst::model {
namespace {

using testing::dense_model_output;
using testing::fd_gradient;
using testing::random_batch;
using testing::random_params;

ModelConfig tiny(Task task = Task::kBinaryClassification,
                 ObservableMode mode = ObservableMode::kPauliZ) {
  ModelConfig c;
  c.n_data_qubits = 2;
  c.ansatz_layers = 1;
  c.seq_len = 2;
  c.input_dim = 3;
  c.embed_dim = 2;
  c.poly_degree = 2;
  c.n_outputs = 2;
  c.ff_layers = 1;
  c.task = task;
  c.observable_mode = mode;
  return c;
}

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::kInvalidArgument;
}

TEST(Ansatz, LayoutAndRing) {
  auto c2 = ansatz(2, 1);
  EXPECT_EQ(c2.n_param_slots, 4u);
  EXPECT_EQ(c2.ops.size(), 5u);  // RY RZ RY RZ CNOT
  auto c4 = ansatz(4, 2);
  EXPECT_EQ(c4.n_param_slots, 16u);
  EXPECT_EQ(c4.ops.size(), 2u * (8u + 4u));
  EXPECT_EQ(c4.ops[11].controls[0], 3u);
  EXPECT_EQ(c4.ops[11].targets[0], 0u);
}

TEST(CountParameters, MatchesFlatLayout) {
  for (auto mode : {ObservableMode::kPauliZ, ObservableMode::kTrainableHermitian}) {
    auto c = tiny(Task::kBinaryClassification, mode);
    Rng rng = substream(1, "count");
    EXPECT_EQ(count_parameters(c), ModelParams::init(c, rng).flatten(c).size());
  }
  CircuitDescription one;
  one.n_qubits = 1;
  one.n_param_slots = 1;
  one.add(qsim::gates::ry(0, 0));
  EXPECT_EQ(count_parameters(one), 1u);
}

TEST(CountParameters, DefaultConfigClosedForm) {
  ModelConfig c;
  // projection 16*8 + 16, W_E 16*16, Theta 16, LCU 2*8, poly 2*3, U_FF 8, head 4 + 1.
  EXPECT_EQ(count_parameters(c), 128u + 16u + 256u + 16u + 16u + 6u + 8u + 5u);
  EXPECT_EQ(count_parameters(c), 451u);
}

TEST(Params, FlattenRoundTrip) {
  auto c = tiny(Task::kRegression, ObservableMode::kTrainableHermitian);
  Rng rng = substream(2, "params");
  auto p = random_params(c, rng, 1.5);
  auto flat = p.flatten(c);
  auto q = ModelParams::unflatten(c, flat);
  EXPECT_EQ(q.flatten(c), flat);
  flat.pop_back();
  EXPECT_EQ(code_of([&] { ModelParams::unflatten(c, flat); }), ErrorCode::kDimensionMismatch);
  flat.push_back(std::nan(""));
  EXPECT_EQ(code_of([&] { ModelParams::unflatten(c, flat); }), ErrorCode::kNonFinite);
}

TEST(Config, Validation) {
  ModelConfig c;
  c.seq_len = 64;
  c.poly_degree = 3;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::kTooLarge);
  c = ModelConfig{};
  c.poly_degree = 7;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::kDegreeTooLarge);
  c = ModelConfig{};
  c.n_outputs = 5;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::kConfigError);
  c.observable_mode = ObservableMode::kTrainableHermitian;
  EXPECT_NO_THROW(c.validate());
}

TEST(EmbedToAngles, Examples) {
  Rng rng = substream(3, "embed");
  Eigen::MatrixXd e = Eigen::MatrixXd::Random(4, 3);
  EXPECT_EQ(embed_to_angles(e, Eigen::MatrixXd::Zero(3, 5)), Eigen::MatrixXd::Zero(4, 5));
  EXPECT_EQ(embed_to_angles(e, Eigen::MatrixXd::Identity(3, 3)), e);
  Eigen::MatrixXd w(3, 6);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
  auto a = embed_to_angles(e, w);
  for (Eigen::Index t = 0; t < 4; ++t)
    for (Eigen::Index s = 0; s < 6; ++s) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < 3; ++i) acc += e(t, i) * w(i, s);
      EXPECT_NEAR(a(t, s), acc, 1e-12);
    }
  EXPECT_EQ(code_of([&] { embed_to_angles(e, Eigen::MatrixXd::Zero(2, 2)); }),
            ErrorCode::kShapeMismatch);
  Eigen::MatrixXd big = 10.0 * Eigen::MatrixXd::Identity(3, 3);
  auto wrapped = embed_to_angles(e, big, true);
  for (Eigen::Index i = 0; i < wrapped.size(); ++i) {
    EXPECT_GT(wrapped.data()[i], -kPi);
    EXPECT_LE(wrapped.data()[i], kPi);
  }
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
}

TEST(Forward, AllIdentityCircuit) {
  ModelConfig c;
  c.n_data_qubits = 2;
  c.ansatz_layers = 1;
  c.seq_len = 1;
  c.input_dim = 2;
  c.embed_dim = 2;
  c.poly_degree = 1;
  c.n_outputs = 1;
  c.ff_layers = 0;
  auto p = ModelParams::zeros(c);
  p.lcu_raw_weights[0] = 1.0;
  p.poly_coeffs[1] = 1.0;
  p.head(0) = 2.0;
  p.head_bias = -0.5;
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 2);
  auto pred = forward(c, p, x);
  ASSERT_EQ(pred.expectations.size(), 1u);
  EXPECT_NEAR(pred.expectations[0], 1.0, 1e-14);
  EXPECT_NEAR(pred.output, 1.5, 1e-14);
  EXPECT_NEAR(pred.lcu_success_prob, 1.0, 1e-14);
  EXPECT_NEAR(pred.poly_success_prob, 1.0, 1e-14);
}

TEST(Forward, OneHotWeightsReduceToSingleTimestep) {
  ModelConfig c;
  c.n_data_qubits = 3;
  c.seq_len = 4;
  c.input_dim = 3;
  c.embed_dim = 4;
  c.n_outputs = 3;
  Rng rng = substream(4, "onehot");
  auto p = random_params(c, rng, 1.0);
  auto batch = random_batch(c, 1, 4, rng);
  ModelConfig single = c;
  single.seq_len = 1;
  for (std::size_t t = 0; t < c.seq_len; ++t) {
    std::fill(p.lcu_raw_weights.begin(), p.lcu_raw_weights.end(), Complex{});
    p.lcu_raw_weights[t] = Complex(0.6, -0.8);
    auto q = p;
    q.lcu_raw_weights = {p.lcu_raw_weights[t]};
    const auto full = forward(c, p, batch[0]);
    const auto one = forward(single, q, Eigen::MatrixXd(batch[0].series.row(static_cast<Eigen::Index>(t))));
    EXPECT_NEAR(full.output, one.output, 1e-10);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(full.expectations[k], one.expectations[k], 1e-10);
  }
}

TEST(Forward, MatchesDenseReferencePipeline) {
  ModelConfig c;
  c.n_data_qubits = 4;
  c.seq_len = 4;
  c.poly_degree = 2;
  c.input_dim = 5;
  c.embed_dim = 6;
  for (auto mode : {ObservableMode::kPauliZ, ObservableMode::kTrainableHermitian}) {
    c.observable_mode = mode;
    Rng rng = substream(5, "dense");
    for (double l1 : {0.7, 2.5}) {
      auto p = random_params(c, rng, l1);
      for (const auto& s : random_batch(c, 3, 4, rng)) {
        std::vector<double> z;
        const double expect = dense_model_output(c, p, s.series, &z);
        const auto pred = forward(c, p, s);
        EXPECT_NEAR(pred.output, expect, 1e-8);
        for (std::size_t k = 0; k < z.size(); ++k) EXPECT_NEAR(pred.expectations[k], z[k], 1e-8);
      }
    }
  }
}

TEST(Forward, MatchesPostselectedPolynomialCircuit) {
  auto c = tiny();
  c.ff_layers = 0;
  Rng rng = substream(6, "circuit");
  auto p = random_params(c, rng, 1.3);
  auto s = random_batch(c, 1, 2, rng)[0];
  const auto pred = forward(c, p, s);

  lcu::LcuPlan plan;
  auto b = lcu::normalize_weights(p.lcu_raw_weights);
  const auto unit = ansatz(c.n_data_qubits, c.ansatz_layers);
  for (std::size_t t = 0; t < c.seq_len; ++t) {
    std::vector<double> angles(c.angle_count());
    const Eigen::VectorXd e = p.projection * s.series.row(static_cast<Eigen::Index>(t)).transpose() + p.projection_bias;
    for (std::size_t k = 0; k < angles.size(); ++k)
      angles[k] = e.dot(p.w_e.col(static_cast<Eigen::Index>(k))) + p.theta(static_cast<Eigen::Index>(k));
    plan.weights.push_back(b.weights[t]);
    plan.unitaries.push_back(qsim::bind_parameters(unit, angles));
  }
  const auto be = lcu::build_block_encoding(plan);
  const auto post = qsvt::apply_polynomial({p.poly_coeffs}, be, Statevector(c.n_data_qubits));
  EXPECT_EQ(c.total_qubits(), 6u);
  EXPECT_NEAR(pred.poly_success_prob, post.success_prob, 1e-10);
  double y = p.head_bias;
  for (std::size_t k = 0; k < c.n_outputs; ++k)
    y += p.head(static_cast<Eigen::Index>(k)) *
         observables::expectation(observables::HermitianObservable::pauli_z(2, k), post.state);
  EXPECT_NEAR(pred.output, y, 1e-10);
}

TEST(Forward, PostselectionImpossibleNamesSample) {
  auto c = tiny();
  Rng rng = substream(7, "post");
  auto p = ModelParams::init(c, rng);
  std::fill(p.poly_coeffs.begin(), p.poly_coeffs.end(), Complex{});
  auto s = random_batch(c, 1, 2, rng)[0];
  s.subject_id = "subj42";
  try {
    forward(c, p, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPostselectionImpossible);
    EXPECT_NE(std::string(e.what()).find("subj42"), std::string::npos);
  }
}

TEST(Loss, Examples) {
  Prediction pred;
  pred.output = 1.0;
  EXPECT_EQ(loss(pred, 1.0, Task::kRegression), 0.0);
  pred.output = 0.5;
  EXPECT_DOUBLE_EQ(loss(pred, 1.0, Task::kRegression), 0.25);
  pred.output = 0.0;
  EXPECT_NEAR(loss(pred, 0.0, Task::kBinaryClassification), std::log(2.0), 1e-15);
  EXPECT_NEAR(loss(pred, 1.0, Task::kBinaryClassification), std::log(2.0), 1e-15);
}

TEST(Gradient, SingleRotationAtQuarterTurn) {
  // One qubit, one layer (RY then RZ), identity polynomial, no U_FF.
  ModelConfig c;
  c.n_data_qubits = 1;
  c.ansatz_layers = 1;
  c.seq_len = 1;
  c.input_dim = 1;
  c.embed_dim = 1;
  c.poly_degree = 1;
  c.n_outputs = 1;
  c.ff_layers = 0;
  c.task = Task::kRegression;
  auto p = ModelParams::zeros(c);
  p.lcu_raw_weights[0] = 1.0;
  p.poly_coeffs[1] = 1.0;
  p.head(0) = 1.0;
  p.theta(0) = kPi / 2;
  dataio::TimeSeriesSample s{"a", Eigen::MatrixXd::Zero(1, 1), 0.0};
  const double y = forward(c, p, s).output;
  EXPECT_NEAR(y, 0.0, 1e-15);
  // Target y - 0.5 makes dL/dy = 1, so the theta gradient is d<Z>/dtheta.
  s.label = y - 0.5;
  const auto g = gradient(c, p, std::span(&s, 1));
  EXPECT_NEAR(g.grad[ParamLayout(c).theta], -1.0, 1e-12);
}

TEST(Gradient, StationaryAtZeroAngles) {
  auto c = tiny();
  c.ff_layers = 0;
  auto p = ModelParams::zeros(c);
  p.projection.setConstant(0.3);
  std::fill(p.lcu_raw_weights.begin(), p.lcu_raw_weights.end(), Complex(0.5));
  p.poly_coeffs[1] = 1.0;
  p.head.setConstant(0.7);
  Rng rng = substream(8, "stationary");
  auto batch = random_batch(c, 4, 6, rng);
  const auto g = gradient(c, p, batch);
  const ParamLayout lay(c);
  for (std::size_t i = lay.w_e; i < lay.theta; ++i) EXPECT_NEAR(g.grad[i], 0.0, 1e-12);
}

struct GradCase {
  Task task;
  ObservableMode mode;
  double lcu_l1;
  std::size_t degree;
};

class GradientFd : public ::testing::TestWithParam<GradCase> {};

TEST_P(GradientFd, MatchesCentralDifferences) {
  const auto gc = GetParam();
  auto c = tiny(gc.task, gc.mode);
  c.poly_degree = gc.degree;
  Rng rng = substream(9, "fd");
  auto p = random_params(c, rng, gc.lcu_l1);
  auto batch = random_batch(c, 3, 5, rng);
  const auto analytic = gradient(c, p, batch);
  const auto fd = fd_gradient(c, p, batch);
  std::size_t worst = 0;
  EXPECT_TRUE(testing::gradients_agree(analytic.grad, fd, 1e-4, 1e-6, &worst))
      << "worst index " << worst << ": " << analytic.grad[worst] << " vs " << fd[worst];
  double mean = 0.0;
  for (const auto& s : batch) mean += loss(forward(c, p, s), s.label, c.task);
  EXPECT_NEAR(analytic.loss, mean / 3.0, 1e-14);
}

INSTANTIATE_TEST_SUITE_P(
    Cases, GradientFd,
    ::testing::Values(GradCase{Task::kBinaryClassification, ObservableMode::kPauliZ, 1.7, 2},
                      GradCase{Task::kBinaryClassification, ObservableMode::kPauliZ, 0.6, 2},
                      GradCase{Task::kRegression, ObservableMode::kTrainableHermitian, 2.2, 2},
                      GradCase{Task::kRegression, ObservableMode::kPauliZ, 0.8, 1},
                      GradCase{Task::kBinaryClassification, ObservableMode::kTrainableHermitian, 1.4, 3}));

TEST(Gradient, IndependentOfThreadCount) {
  auto c = tiny();
  Rng rng = substream(10, "threads");
  auto p = random_params(c, rng, 1.2);
  auto batch = random_batch(c, 7, 4, rng);
  setenv("QTST_THREADS", "1", 1);
  const auto a = gradient(c, p, batch);
  setenv("QTST_THREADS", "3", 1);
  const auto b = gradient(c, p, batch);
  unsetenv("QTST_THREADS");
  EXPECT_EQ(a.grad, b.grad);
  EXPECT_EQ(a.loss, b.loss);
}

TEST(Gradient, EmptyBatch) {
  auto c = tiny();
  auto p = ModelParams::zeros(c);
  EXPECT_EQ(code_of([&] { gradient(c, p, std::span<const dataio::TimeSeriesSample>{}); }),
            ErrorCode::kDataEmpty);
}

}  // namespace
}  // namespace qtst::model
