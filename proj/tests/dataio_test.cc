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
#include "qtst/dataio.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "gtest/gtest.h"
#include "qtst/metrics.hpp"

namespace qtst::dataio {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("qtst_dataio_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
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

// Probe: mean over time and affected ROIs, scored against the label.
double probe_auroc(const Dataset& d, const std::vector<std::size_t>& rois) {
  std::vector<double> s, y;
  for (const auto& x : d) {
    double m = 0.0;
    for (auto r : rois) m += x.series.col(static_cast<Eigen::Index>(r)).mean();
    s.push_back(m);
    y.push_back(x.label);
  }
  return metrics::auroc_value(s, y);
}

TEST(Generate, ShapesLabelsAndDeterminism) {
  SyntheticSpec spec;
  spec.n_subjects = 10;
  spec.n_rois = 5;
  spec.n_timepoints = 20;
  spec.seed = 7;
  auto a = generate(spec);
  auto b = generate(spec);
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].series.rows(), 20);
    EXPECT_EQ(a[i].series.cols(), 5);
    EXPECT_EQ(a[i].label, static_cast<double>(i % 2));
    EXPECT_EQ(a[i].series, b[i].series);
  }
  spec.seed = 8;
  EXPECT_NE(generate(spec)[0].series, a[0].series);
}

TEST(Generate, DatasetLevelZScore) {
  SyntheticSpec spec;
  spec.n_subjects = 20;
  auto d = generate(spec);
  for (Eigen::Index r = 0; r < 8; ++r) {
    double sum = 0.0, ss = 0.0, n = 0.0;
    for (const auto& s : d)
      for (Eigen::Index t = 0; t < s.series.rows(); ++t) {
        sum += s.series(t, r);
        ss += s.series(t, r) * s.series(t, r);
        n += 1.0;
      }
    EXPECT_NEAR(sum / n, 0.0, 1e-12);
    EXPECT_NEAR(ss / n, 1.0, 1e-12);
  }
}

TEST(Generate, NullEffectIsUninformative) {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SyntheticSpec spec;
    spec.effect_size = 0.0;
    spec.seed = seed;
    total += probe_auroc(generate(spec), spec.affected_rois);
  }
  const double mean = total / 20.0;
  EXPECT_GE(mean, 0.35);
  EXPECT_LE(mean, 0.65);
}

TEST(Generate, PlantedMeanShiftIsRecoverable) {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SyntheticSpec spec;
    spec.seed = seed;
    total += probe_auroc(generate(spec), spec.affected_rois);
  }
  EXPECT_GE(total / 20.0, 0.95);
}

TEST(Generate, ConnectivityShiftRaisesCorrelation) {
  SyntheticSpec spec;
  spec.effect = Effect::kConnectivityShift;
  spec.seed = 1;
  auto d = generate(spec);
  double corr[2] = {0.0, 0.0};
  for (const auto& s : d) {
    Eigen::VectorXd a = s.series.col(0).array() - s.series.col(0).mean();
    Eigen::VectorXd b = s.series.col(1).array() - s.series.col(1).mean();
    corr[static_cast<int>(s.label)] += a.dot(b) / (a.norm() * b.norm());
  }
  EXPECT_GT(corr[1] / 50.0, corr[0] / 50.0 + 0.5);
}

TEST(Generate, LagShiftCouplesToSource) {
  SyntheticSpec spec;
  spec.effect = Effect::kLagShift;
  spec.affected_rois = {1};
  spec.seed = 2;
  auto d = generate(spec);
  double lagged[2] = {0.0, 0.0};
  for (const auto& s : d) {
    const Eigen::Index T = s.series.rows();
    Eigen::VectorXd src = s.series.col(0).head(T - 2);
    Eigen::VectorXd dst = s.series.col(1).tail(T - 2);
    lagged[static_cast<int>(s.label)] += src.dot(dst) / (src.norm() * dst.norm());
  }
  EXPECT_GT(lagged[1], lagged[0] + 10.0);
}

TEST(Generate, ContinuousTargets) {
  SyntheticSpec spec;
  spec.target = TargetKind::kContinuous;
  spec.seed = 3;
  auto d = generate(spec);
  std::set<double> distinct;
  for (const auto& s : d) {
    EXPECT_GE(s.label, 0.0);
    EXPECT_LT(s.label, 1.0);
    distinct.insert(s.label);
  }
  EXPECT_EQ(distinct.size(), d.size());
}

TEST(Generate, RejectsBadSpec) {
  SyntheticSpec spec;
  spec.affected_rois = {9};
  EXPECT_EQ(code_of([&] { generate(spec); }), ErrorCode::kIndexOutOfRange);
  spec.affected_rois = {0};
  spec.effect_size = -1.0;
  EXPECT_EQ(code_of([&] { generate(spec); }), ErrorCode::kInvalidArgument);
}

TEST(ZScore, IdempotentAndFlagsConstantRois) {
  SyntheticSpec spec;
  spec.n_subjects = 6;
  auto d = generate(spec);
  auto again = d;
  zscore(again);
  for (std::size_t i = 0; i < d.size(); ++i)
    EXPECT_LT((again[i].series - d[i].series).cwiseAbs().maxCoeff(), 1e-12);
  for (auto& s : d) s.series.col(3).setConstant(2.5);
  auto report = zscore(d);
  ASSERT_EQ(report.constant_rois, std::vector<std::size_t>{3});
  for (const auto& s : d) EXPECT_EQ(s.series.col(3).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ZScore, PerSubject) {
  SyntheticSpec spec;
  spec.n_subjects = 4;
  auto d = generate(spec);
  zscore(d, ZScoreMode::kPerSubject);
  for (const auto& s : d)
    for (Eigen::Index r = 0; r < s.series.cols(); ++r) {
      EXPECT_NEAR(s.series.col(r).mean(), 0.0, 1e-12);
      EXPECT_NEAR(s.series.col(r).squaredNorm() / static_cast<double>(s.series.rows()), 1.0, 1e-12);
    }
}

TEST(Csv, RoundTripBothFormats) {
  SyntheticSpec spec;
  spec.n_subjects = 6;
  spec.n_timepoints = 12;
  spec.n_rois = 3;
  spec.affected_rois = {0};
  auto d = generate(spec);
  auto dir_long = scratch("long");
  auto dir_sub = scratch("sub");
  write_csv(dir_long, d, CsvFormat::kLong);
  write_csv(dir_sub, d, CsvFormat::kPerSubject);
  auto a = load_csv({CsvFormat::kLong, dir_long / "series.csv", dir_long / "labels.csv"});
  auto b = load_csv({CsvFormat::kPerSubject, dir_sub, dir_sub / "labels.csv"});
  ASSERT_EQ(a.size(), d.size());
  ASSERT_EQ(b.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(a[i].subject_id, d[i].subject_id);
    EXPECT_EQ(b[i].subject_id, d[i].subject_id);
    EXPECT_EQ(a[i].label, d[i].label);
    EXPECT_LT((a[i].series - d[i].series).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((b[i].series - a[i].series).cwiseAbs().maxCoeff(), 1e-12);
  }
  auto raw = load_csv({CsvFormat::kLong, dir_long / "series.csv", dir_long / "labels.csv", false,
                       ZScoreMode::kNone});
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(raw[i].series, d[i].series);
}

TEST(Csv, ParseErrorNamesLineAndColumn) {
  auto dir = scratch("bad");
  write_file(dir / "labels.csv", "subject_id,label\na,0\n");
  write_file(dir / "series.csv", "subject_id,t,roi_0,roi_1\na,0,1.0,2.0\na,1,1.5,nan\n");
  try {
    load_csv({CsvFormat::kLong, dir / "series.csv", dir / "labels.csv"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_NE(std::string(e.what()).find(":3 column roi_1"), std::string::npos) << e.what();
  }
  write_file(dir / "series.csv", "subject_id,t,roi_0,roi_1\na,0,1.0,x\n");
  EXPECT_EQ(code_of([&] { load_csv({CsvFormat::kLong, dir / "series.csv", dir / "labels.csv"}); }),
            ErrorCode::kParseError);
}

TEST(Csv, SchemaMismatches) {
  auto dir = scratch("schema");
  write_file(dir / "labels.csv", "subject_id,label\na,0\nb,1\n");
  write_file(dir / "series.csv", "subject_id,t,roi_0,roi_2\na,0,1,2\n");
  const CsvSchema schema{CsvFormat::kLong, dir / "series.csv", dir / "labels.csv"};
  EXPECT_EQ(code_of([&] { load_csv(schema); }), ErrorCode::kSchemaMismatch);
  write_file(dir / "series.csv", "subject_id,t,roi_0\na,0,1\n");
  EXPECT_EQ(code_of([&] { load_csv(schema); }), ErrorCode::kSchemaMismatch);
  write_file(dir / "labels.csv", "id,label\na,0\n");
  EXPECT_EQ(code_of([&] { load_csv(schema); }), ErrorCode::kSchemaMismatch);
}

TEST(Csv, RaggedSeries) {
  auto dir = scratch("ragged");
  write_file(dir / "labels.csv", "subject_id,label\na,0\nb,1\n");
  write_file(dir / "series.csv",
             "subject_id,t,roi_0\na,0,1\na,1,2\na,2,3\nb,0,4\nb,1,6\n");
  CsvSchema schema{CsvFormat::kLong, dir / "series.csv", dir / "labels.csv"};
  schema.zscore = ZScoreMode::kNone;
  EXPECT_EQ(code_of([&] { load_csv(schema); }), ErrorCode::kRaggedSeries);
  schema.truncate = true;
  auto d = load_csv(schema);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0].series.rows(), 2);
  EXPECT_EQ(d[0].series(1, 0), 2.0);
}

TEST(Csv, MissingFileIsIoError) {
  EXPECT_EQ(code_of([] {
              load_csv({CsvFormat::kLong, "/nonexistent/series.csv", "/nonexistent/labels.csv"});
            }),
            ErrorCode::kIoError);
}

TEST(Split, SeventyFifteenFifteenStratified) {
  SyntheticSpec spec;
  auto d = generate(spec);
  auto s = split(d, {0.7, 0.15, 0.15}, 11, true);
  EXPECT_EQ(s.train.size(), 70u);
  EXPECT_EQ(s.val.size(), 15u);
  EXPECT_EQ(s.test.size(), 15u);
  std::set<std::size_t> all;
  for (auto* part : {&s.train, &s.val, &s.test}) {
    double pos = 0.0;
    for (auto i : *part) {
      all.insert(i);
      pos += d[i].label;
    }
    const double frac = pos / static_cast<double>(part->size());
    EXPECT_NEAR(frac, 0.5, 0.5 / static_cast<double>(part->size()) + 1e-12);
  }
  EXPECT_EQ(all.size(), 100u);
  auto again = split(d, {0.7, 0.15, 0.15}, 11, true);
  EXPECT_EQ(again.train, s.train);
  EXPECT_EQ(again.test, s.test);
  EXPECT_NE(split(d, {0.7, 0.15, 0.15}, 12, true).train, s.train);
}

TEST(Split, ValidationAndEmptyPartitions) {
  SyntheticSpec spec;
  spec.n_subjects = 10;
  auto d = generate(spec);
  EXPECT_EQ(code_of([&] { split(d, {0.5, 0.2, 0.2}, 0, true); }), ErrorCode::kInvalidArgument);
  auto s = split(d, {1.0, 0.0, 0.0}, 0, false);
  EXPECT_EQ(s.train.size(), 10u);
  EXPECT_TRUE(s.val.empty());
  EXPECT_TRUE(s.test.empty());
  Dataset tiny(d.begin(), d.begin() + 4);
  EXPECT_EQ(code_of([&] { split(tiny, {0.4, 0.3, 0.3}, 0, true); }), ErrorCode::kTooFewPerClass);
}

TEST(Segment, WindowMeans) {
  Eigen::MatrixXd x(6, 2);
  x << 0, 10, 1, 11, 2, 12, 3, 13, 4, 14, 5, 15;
  auto s = segment(x, 3);
  Eigen::MatrixXd expect(3, 2);
  expect << 0.5, 10.5, 2.5, 12.5, 4.5, 14.5;
  EXPECT_EQ(s, expect);
  EXPECT_EQ(segment(x, 6), x);
  EXPECT_EQ(code_of([&] { segment(x, 7); }), ErrorCode::kShapeMismatch);
}

}  // namespace
}  // namespace qtst::dataio
