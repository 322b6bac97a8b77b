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
#include "qtst/metrics.hpp"

#include <cmath>
#include <vector>

#include "gtest/gtest.h"

namespace qtst::metrics {
namespace {

// Pairwise definition: P(score_pos > score_neg) + 0.5 P(tie).
double pairwise_auroc(const std::vector<double>& s, const std::vector<double>& y) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1.0 && y[j] == 0.0) {
        den += 1.0;
        num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return num / den;
}

TEST(Auroc, PerfectAndInverted) {
  std::vector<double> y{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(auroc_value(std::vector<double>{0.1, 0.2, 0.8, 0.9}, y), 1.0);
  EXPECT_DOUBLE_EQ(auroc_value(std::vector<double>{0.9, 0.8, 0.2, 0.1}, y), 0.0);
}

TEST(Auroc, AllTiedIsHalfAndDegenerate) {
  std::vector<double> s(6, 0.3), y{0, 1, 0, 1, 1, 0};
  auto r = auroc(s, y);
  ASSERT_TRUE(r.value);
  EXPECT_DOUBLE_EQ(*r.value, 0.5);
  EXPECT_TRUE(r.degenerate);
}

TEST(Auroc, SingleClassIsUndefined) {
  std::vector<double> s{0.1, 0.2}, y{1, 1};
  EXPECT_FALSE(auroc(s, y).value.has_value());
  try {
    auroc_value(s, y);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingleClassAuroc);
  }
}

TEST(Auroc, MatchesPairwiseWithTies) {
  Rng rng = substream(3, "auroc");
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> s(30), y(30);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = std::floor(uniform(rng, 0.0, 5.0));
      y[i] = i % 3 == 0 ? 1.0 : 0.0;
    }
    EXPECT_NEAR(auroc_value(s, y), pairwise_auroc(s, y), 1e-12);
  }
}

TEST(Auroc, InvariantToMonotoneTransform) {
  std::vector<double> s{-1.0, 0.5, 0.2, 3.0, 2.0, -0.7}, y{0, 1, 0, 1, 1, 0};
  std::vector<double> t;
  for (double v : s) t.push_back(std::exp(v));
  EXPECT_DOUBLE_EQ(auroc_value(s, y), auroc_value(t, y));
}

TEST(Losses, LogisticValueAndGradient) {
  EXPECT_NEAR(logistic_loss(0.0, 1.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(logistic_loss(800.0, 1.0), 0.0, 1e-12);
  EXPECT_NEAR(logistic_loss(-800.0, 0.0), 0.0, 1e-12);
  EXPECT_TRUE(std::isfinite(logistic_loss(-800.0, 1.0)));
  for (double x : {-3.0, -0.2, 0.0, 1.5}) {
    for (double y : {0.0, 1.0}) {
      const double h = 1e-6;
      const double fd = (logistic_loss(x + h, y) - logistic_loss(x - h, y)) / (2 * h);
      EXPECT_NEAR(logistic_loss_grad(x, y), fd, 1e-8);
    }
  }
}

TEST(Losses, Squared) {
  EXPECT_DOUBLE_EQ(squared_loss(3.0, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(squared_loss_grad(3.0, 1.0), 4.0);
}

TEST(Mae, Basic) {
  EXPECT_DOUBLE_EQ(mae(std::vector<double>{1, 2, 3}, std::vector<double>{1, 0, 6}), 5.0 / 3.0);
  EXPECT_THROW(mae(std::vector<double>{}, std::vector<double>{}), Error);
}

TEST(MeanStd, SampleDeviation) {
  auto r = mean_std(std::vector<double>{1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(r.mean, 2.5);
  EXPECT_NEAR(r.std, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_EQ(mean_std(std::vector<double>{7.0}).std, 0.0);
  EXPECT_THROW(mean_std(std::vector<double>{}), Error);
}

}  // namespace
}  // namespace qtst::metrics
