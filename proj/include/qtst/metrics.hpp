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
 * @file metrics.hpp
 * Pointwise losses and evaluation metrics.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "qtst/core.hpp"

namespace qtst::metrics {

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Binary cross-entropy on a logit, label in {0, 1}.
inline double logistic_loss(double logit, double label) { return softplus(logit) - label * logit; }
inline double logistic_loss_grad(double logit, double label) { return sigmoid(logit) - label; }

inline double squared_loss(double prediction, double target) {
  return (prediction - target) * (prediction - target);
}
inline double squared_loss_grad(double prediction, double target) {
  return 2.0 * (prediction - target);
}

enum class Task { kBinaryClassification, kRegression };

/// Logistic loss on a logit for classification, squared error for regression.
inline double loss(Task task, double output, double target) {
  return task == Task::kBinaryClassification ? logistic_loss(output, target)
                                             : squared_loss(output, target);
}

inline double loss_grad(Task task, double output, double target) {
  return task == Task::kBinaryClassification ? logistic_loss_grad(output, target)
                                             : squared_loss_grad(output, target);
}

struct AurocResult {
  /// Empty when only one class is present.
  std::optional<double> value;
  /// All scores tied; value is 0.5.
  bool degenerate = false;
};

/// Area under the ROC curve via the rank-sum statistic with averaged ranks
/// for ties. Labels are 0/1.
inline AurocResult auroc(std::span<const double> scores, std::span<const double> labels) {
  QTST_REQUIRE(scores.size() == labels.size(), ErrorCode::kDimensionMismatch,
               "scores and labels differ in length");
  QTST_REQUIRE(!scores.empty(), ErrorCode::kDataEmpty, "auroc of empty input");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (double l : labels) {
    QTST_REQUIRE(l == 0.0 || l == 1.0, ErrorCode::kInvalidArgument, "auroc labels must be 0 or 1");
    n_pos += l == 1.0;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return {};

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  double pos_ranks = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] == 1.0) pos_ranks += rank[i];
  const double np = static_cast<double>(n_pos);
  const double u = pos_ranks - np * (np + 1.0) / 2.0;
  AurocResult r;
  r.value = u / (np * static_cast<double>(n_neg));
  r.degenerate = std::all_of(scores.begin(), scores.end(),
                             [&](double s) { return s == scores.front(); });
  return r;
}

/// Strict variant: throws SingleClassAuroc when one class is missing.
inline double auroc_value(std::span<const double> scores, std::span<const double> labels) {
  auto r = auroc(scores, labels);
  QTST_REQUIRE(r.value.has_value(), ErrorCode::kSingleClassAuroc,
               "AUROC undefined with a single class");
  return *r.value;
}

inline double mae(std::span<const double> predictions, std::span<const double> targets) {
  QTST_REQUIRE(predictions.size() == targets.size(), ErrorCode::kDimensionMismatch,
               "predictions and targets differ in length");
  QTST_REQUIRE(!predictions.empty(), ErrorCode::kDataEmpty, "mae of empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) s += std::abs(predictions[i] - targets[i]);
  return s / static_cast<double>(predictions.size());
}

struct MeanStd {
  double mean = 0.0;
  /// Sample standard deviation (n - 1); 0 for a single value.
  double std = 0.0;
  std::size_t n = 0;
};

inline MeanStd mean_std(std::span<const double> values) {
  QTST_REQUIRE(!values.empty(), ErrorCode::kEmptyResults, "no values to aggregate");
  MeanStd r;
  r.n = values.size();
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(r.n);
  if (r.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(r.n - 1));
  }
  return r;
}

}  // namespace qtst::metrics
