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
 * @file attribution.hpp
 * Occlusion attribution: the contribution of a feature is the signed change
 * in model output when that feature is replaced by a baseline value,
 *   value_f = output(x) - output(x with f occluded).
 * Single-feature occlusion only; no coalition sampling.
 */
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "qtst/core.hpp"
#include "qtst/dataio.hpp"
#include "qtst/parallel.hpp"

namespace qtst::attribution {

enum class Granularity { kRoi, kTimestep, kRoiTimestep };
enum class BaselineSpec { kZeros, kFeatureMean };

inline std::string to_string(Granularity g) {
  switch (g) {
    case Granularity::kRoi: return "roi";
    case Granularity::kTimestep: return "timestep";
    case Granularity::kRoiTimestep: return "roi_timestep";
  }
  return "?";
}

inline std::string to_string(BaselineSpec b) {
  return b == BaselineSpec::kZeros ? "zeros" : "feature_mean";
}

struct AttributionResult {
  std::string model_id;
  std::string sample_id;
  BaselineSpec baseline = BaselineSpec::kFeatureMean;
  Granularity granularity = Granularity::kRoi;
  std::vector<std::string> feature_ids;
  /// One signed value per feature, in model-output units.
  std::vector<double> values;
};

/// Per-ROI occlusion values: training-set means, or zeros.
inline Eigen::VectorXd baseline_values(const dataio::Dataset& train_set, BaselineSpec spec) {
  QTST_REQUIRE(!train_set.empty(), ErrorCode::kDataEmpty, "baseline needs a non-empty dataset");
  const auto n_rois = train_set.front().series.cols();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n_rois);
  if (spec == BaselineSpec::kZeros) return b;
  double count = 0.0;
  for (const auto& s : train_set) {
    b += s.series.colwise().sum().transpose();
    count += static_cast<double>(s.series.rows());
  }
  return b / count;
}

inline std::vector<std::string> feature_ids(Granularity g, Eigen::Index timesteps, Eigen::Index rois) {
  std::vector<std::string> ids;
  switch (g) {
    case Granularity::kRoi:
      for (Eigen::Index r = 0; r < rois; ++r) ids.push_back("roi_" + std::to_string(r));
      break;
    case Granularity::kTimestep:
      for (Eigen::Index t = 0; t < timesteps; ++t) ids.push_back("t_" + std::to_string(t));
      break;
    case Granularity::kRoiTimestep:
      for (Eigen::Index t = 0; t < timesteps; ++t)
        for (Eigen::Index r = 0; r < rois; ++r)
          ids.push_back("t_" + std::to_string(t) + ":roi_" + std::to_string(r));
      break;
  }
  return ids;
}

/// `predict` maps a (timepoints x rois) series to the model output (logit for
/// classification). Timestep features are raw timepoints of the series.
template <class Predict>
AttributionResult occlusion_attribution(Predict&& predict, const dataio::TimeSeriesSample& sample,
                                        const Eigen::VectorXd& baseline, Granularity granularity,
                                        BaselineSpec spec, std::string model_id = "") {
  const auto T = sample.series.rows();
  const auto R = sample.series.cols();
  QTST_REQUIRE(baseline.size() == R, ErrorCode::kShapeMismatch,
               "baseline has " + std::to_string(baseline.size()) + " ROIs, sample has " +
                   std::to_string(R));
  AttributionResult out;
  out.model_id = std::move(model_id);
  out.sample_id = sample.subject_id;
  out.baseline = spec;
  out.granularity = granularity;
  out.feature_ids = feature_ids(granularity, T, R);
  out.values.resize(out.feature_ids.size());
  const double full = predict(sample.series);

  parallel_for(out.values.size(), [&](std::size_t f) {
    Eigen::MatrixXd x = sample.series;
    const auto fi = static_cast<Eigen::Index>(f);
    switch (granularity) {
      case Granularity::kRoi: x.col(fi).setConstant(baseline(fi)); break;
      case Granularity::kTimestep: x.row(fi) = baseline.transpose(); break;
      case Granularity::kRoiTimestep: x(fi / R, fi % R) = baseline(fi % R); break;
    }
    try {
      out.values[f] = full - predict(x);
    } catch (const Error& e) {
      throw Error(e.code(), std::string(e.what()) + " (occluding " + out.feature_ids[f] + ")");
    }
  });
  return out;
}

struct BeeswarmRow {
  std::string feature_id;
  /// 1-based rank by mean |value|.
  std::size_t rank = 0;
  double mean_abs = 0.0;
  double mean = 0.0;
  std::vector<std::string> sample_ids;
  std::vector<double> values;
};

/// Features ranked by mean |value| across results (ties keep feature order);
/// the first `top_k` rows are returned with every per-sample value.
inline std::vector<BeeswarmRow> aggregate_beeswarm(const std::vector<AttributionResult>& results,
                                                   std::size_t top_k) {
  QTST_REQUIRE(!results.empty(), ErrorCode::kEmptyResults, "no attribution results");
  const auto& ids = results.front().feature_ids;
  for (const auto& r : results)
    QTST_REQUIRE(r.feature_ids == ids, ErrorCode::kShapeMismatch,
                 "attribution results do not share a feature space");
  const std::size_t n = ids.size();
  std::vector<BeeswarmRow> rows(n);
  for (std::size_t f = 0; f < n; ++f) {
    rows[f].feature_id = ids[f];
    for (const auto& r : results) {
      rows[f].sample_ids.push_back(r.sample_id);
      rows[f].values.push_back(r.values[f]);
      rows[f].mean_abs += std::abs(r.values[f]);
      rows[f].mean += r.values[f];
    }
    rows[f].mean_abs /= static_cast<double>(results.size());
    rows[f].mean /= static_cast<double>(results.size());
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const BeeswarmRow& a, const BeeswarmRow& b) { return a.mean_abs > b.mean_abs; });
  rows.resize(std::min(top_k, n));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].rank = i + 1;
  return rows;
}

inline void write_csv(std::ostream& os, const std::vector<AttributionResult>& results) {
  QTST_REQUIRE(!results.empty(), ErrorCode::kEmptyResults, "no attribution results");
  os << "# model_id: " << results.front().model_id << '\n'
     << "# baseline_spec: " << to_string(results.front().baseline) << '\n'
     << "# granularity: " << to_string(results.front().granularity) << '\n'
     << "sample_id,feature_id,value\n";
  for (const auto& r : results)
    for (std::size_t f = 0; f < r.values.size(); ++f)
      os << r.sample_id << ',' << r.feature_ids[f] << ',' << dataio::detail::format_number(r.values[f])
         << '\n';
}

inline void write_beeswarm_csv(std::ostream& os, const std::vector<BeeswarmRow>& rows) {
  os << "rank,feature_id,mean_abs,mean,sample_id,value\n";
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.values.size(); ++i)
      os << row.rank << ',' << row.feature_id << ',' << dataio::detail::format_number(row.mean_abs)
         << ',' << dataio::detail::format_number(row.mean) << ',' << row.sample_ids[i] << ','
         << dataio::detail::format_number(row.values[i]) << '\n';
}

}  // namespace qtst::attribution
