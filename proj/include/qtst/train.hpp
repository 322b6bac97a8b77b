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
 * @file train.hpp
 * Model-agnostic training loop (Adam, minibatches, early stopping on the
 * validation metric) and evaluation.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qtst/core.hpp"
#include "qtst/dataio.hpp"
#include "qtst/metrics.hpp"
#include "qtst/parallel.hpp"

namespace qtst::train {

using metrics::Task;

template <class M>
concept TrainableModel = requires(M m, const M cm, const dataio::TimeSeriesSample& s,
                                  std::span<double> grad, std::span<const double> flat) {
  { cm.parameters() } -> std::same_as<std::vector<double>>;
  m.set_parameters(flat);
  { cm.predict(s.series, s.subject_id) } -> std::convertible_to<double>;
  { cm.accumulate_gradient(s, grad) } -> std::convertible_to<double>;
  { cm.task() } -> std::same_as<Task>;
  { cm.parameter_count() } -> std::convertible_to<std::size_t>;
};

struct TrainOptions {
  std::size_t epochs = 200;
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t batch_size = 16;
  /// Stop after this many epochs without validation improvement; 0 disables.
  std::size_t patience = 30;
  std::uint64_t seed = 0;

  void validate() const {
    QTST_REQUIRE(epochs >= 1, ErrorCode::kConfigError, "epochs must be >= 1");
    QTST_REQUIRE(batch_size >= 1, ErrorCode::kConfigError, "batch_size must be >= 1");
    QTST_REQUIRE(lr >= 0.0 && std::isfinite(lr), ErrorCode::kConfigError, "lr must be >= 0");
    QTST_REQUIRE(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
                 ErrorCode::kConfigError, "betas must lie in [0, 1)");
  }
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;
};

inline void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& s,
                      const TrainOptions& o) {
  if (s.m.empty()) {
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m[i] = o.beta1 * s.m[i] + (1.0 - o.beta1) * grad[i];
    s.v[i] = o.beta2 * s.v[i] + (1.0 - o.beta2) * grad[i] * grad[i];
    params[i] -= o.lr * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + o.eps);
    QTST_REQUIRE(std::isfinite(params[i]), ErrorCode::kNonFinite,
                 "parameter " + std::to_string(i) + " became non-finite");
  }
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  /// NaN without a validation set.
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  /// Validation AUROC (classification) or MAE (regression); empty when
  /// undefined.
  std::optional<double> val_metric;
};

struct TrainState {
  std::vector<double> params;
  AdamState optimizer;
  /// Epochs completed so far.
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
  std::vector<EpochRecord> history;
  /// Parameters at the best validation epoch.
  std::vector<double> best_params;
  std::size_t best_epoch = 0;
  double best_score = -std::numeric_limits<double>::infinity();
};

struct EvalMetrics {
  double loss = 0.0;
  std::optional<double> auroc;
  bool auroc_degenerate = false;
  std::optional<double> mae;
  std::vector<double> predictions;
};

template <TrainableModel M>
std::vector<double> predict_all(const M& model, const dataio::Dataset& data) {
  std::vector<double> out(data.size());
  parallel_for(data.size(), [&](std::size_t i) { out[i] = model.predict(data[i].series, data[i].subject_id); });
  return out;
}

template <TrainableModel M>
EvalMetrics evaluate(const M& model, const dataio::Dataset& data) {
  QTST_REQUIRE(!data.empty(), ErrorCode::kDataEmpty, "cannot evaluate on an empty dataset");
  EvalMetrics r;
  r.predictions = predict_all(model, data);
  std::vector<double> labels;
  for (std::size_t i = 0; i < data.size(); ++i) {
    r.loss += metrics::loss(model.task(), r.predictions[i], data[i].label);
    labels.push_back(data[i].label);
  }
  r.loss /= static_cast<double>(data.size());
  if (model.task() == Task::kBinaryClassification) {
    auto a = metrics::auroc(r.predictions, labels);
    r.auroc = a.value;
    r.auroc_degenerate = a.degenerate;
  } else {
    r.mae = metrics::mae(r.predictions, labels);
  }
  return r;
}

struct SplitReport {
  EvalMetrics train;
  EvalMetrics test;
  /// Test loss minus train loss.
  double generalization_gap = 0.0;
};

template <TrainableModel M>
SplitReport evaluate(const M& model, const dataio::Dataset& train_set, const dataio::Dataset& test_set) {
  SplitReport r;
  r.train = evaluate(model, train_set);
  r.test = evaluate(model, test_set);
  r.generalization_gap = r.test.loss - r.train.loss;
  return r;
}

/// Higher is better: AUROC, or -MAE, falling back to -loss when AUROC is
/// undefined.
inline double selection_score(Task task, const EvalMetrics& m) {
  if (task == Task::kBinaryClassification) return m.auroc ? *m.auroc : -m.loss;
  return -*m.mae;
}

/// Mean loss and gradient over `batch` (indices into `data`); per-sample
/// results are reduced in batch order.
template <TrainableModel M>
double batch_gradient(const M& model, const dataio::Dataset& data, std::span<const std::size_t> batch,
                      std::vector<double>& grad) {
  const std::size_t n = model.parameter_count();
  std::vector<std::vector<double>> per(batch.size(), std::vector<double>(n, 0.0));
  std::vector<double> losses(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) {
    losses[i] = model.accumulate_gradient(data[batch[i]], per[i]);
  });
  grad.assign(n, 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    loss += losses[i];
    for (std::size_t j = 0; j < n; ++j) grad[j] += per[i][j];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& g : grad) g *= inv;
  return loss * inv;
}

/// Trains `model` in place for up to `options.epochs` further epochs. Pass a
/// previous state to resume; epoch numbering continues from it. On return
/// the model holds the best-validation parameters (or the final ones when
/// there is no validation set).
template <TrainableModel M>
TrainState train(M& model, const dataio::Dataset& train_set, const dataio::Dataset& val_set,
                 const TrainOptions& options, std::optional<TrainState> resume = std::nullopt) {
  options.validate();
  QTST_REQUIRE(!train_set.empty(), ErrorCode::kDataEmpty, "training set is empty");
  TrainState state;
  if (resume) {
    state = std::move(*resume);
    model.set_parameters(state.params);
  } else {
    state.params = model.parameters();
    state.seed = options.seed;
  }
  std::vector<std::size_t> order(train_set.size());
  std::vector<double> grad;
  const std::size_t last = state.epoch + options.epochs;
  while (state.epoch < last) {
    const std::size_t epoch = state.epoch + 1;
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = substream(state.seed, "shuffle:" + std::to_string(epoch));
    std::shuffle(order.begin(), order.end(), rng);

    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    for (std::size_t at = 0; at < order.size(); at += options.batch_size) {
      const std::size_t len = std::min(options.batch_size, order.size() - at);
      const std::span<const std::size_t> batch(order.data() + at, len);
      loss_sum += batch_gradient(model, train_set, batch, grad) * static_cast<double>(len);
      adam_step(state.params, grad, state.optimizer, options);
      model.set_parameters(state.params);
    }
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    state.epoch = epoch;

    if (!val_set.empty()) {
      const auto m = evaluate(model, val_set);
      rec.val_loss = m.loss;
      rec.val_metric = model.task() == Task::kBinaryClassification ? m.auroc : m.mae;
      const double score = selection_score(model.task(), m);
      if (score > state.best_score) {
        state.best_score = score;
        state.best_epoch = epoch;
        state.best_params = state.params;
      }
    }
    state.history.push_back(rec);
    if (!val_set.empty() && options.patience > 0 && epoch - state.best_epoch >= options.patience)
      break;
  }
  if (!state.best_params.empty()) model.set_parameters(state.best_params);
  return state;
}

}  // namespace qtst::train
