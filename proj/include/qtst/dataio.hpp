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
 * @file dataio.hpp
 * ROI time-series samples: synthetic generation with planted effects, CSV
 * ingestion and export, z-scoring, and deterministic stratified splits.
 *
 * CSV formats (UTF-8, LF, '.' decimal point):
 *   long        subject_id,t,roi_0,...,roi_{R-1}
 *   per subject subject_<id>.csv with t,roi_0,...,roi_{R-1}
 *   labels      labels.csv with subject_id,label
 * Subject order of a loaded dataset is the row order of the labels file.
 */
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qtst/core.hpp"

namespace qtst::dataio {

struct TimeSeriesSample {
  std::string subject_id;
  /// timepoints x n_rois.
  Eigen::MatrixXd series;
  /// Class index (0/1) or real-valued target.
  double label = 0.0;
};

using Dataset = std::vector<TimeSeriesSample>;

enum class Effect { kMeanShift, kConnectivityShift, kLagShift };
enum class TargetKind { kBinary, kContinuous };
enum class ZScoreMode { kDataset, kPerSubject, kNone };

struct SyntheticSpec {
  std::size_t n_subjects = 100;
  std::size_t n_rois = 8;
  std::size_t n_timepoints = 64;
  Effect effect = Effect::kMeanShift;
  double effect_size = 3.0;
  std::vector<std::size_t> affected_rois{0, 1};
  std::uint64_t seed = 0;
  TargetKind target = TargetKind::kBinary;

  void validate() const {
    QTST_REQUIRE(effect_size >= 0.0, ErrorCode::kInvalidArgument,
                 "effect_size must be >= 0");
    QTST_REQUIRE(n_rois >= 1 && n_timepoints >= 1, ErrorCode::kInvalidArgument,
                 "n_rois and n_timepoints must be >= 1");
    for (auto r : affected_rois)
      QTST_REQUIRE(r < n_rois, ErrorCode::kIndexOutOfRange,
                   "affected ROI " + std::to_string(r) + " >= n_rois");
  }
};

inline constexpr double kArCoefficient = 0.5;
inline constexpr std::size_t kLag = 2;

// ---------------------------------------------------------------------------
// Z-scoring

struct ZScoreReport {
  /// ROIs whose standard deviation is zero; they are centered but not scaled.
  std::vector<std::size_t> constant_rois;
};

inline ZScoreReport zscore(Dataset& data, ZScoreMode mode = ZScoreMode::kDataset) {
  ZScoreReport report;
  if (data.empty() || mode == ZScoreMode::kNone) return report;
  const auto n_rois = data.front().series.cols();
  auto standardize = [&](auto&& for_each_value, auto&& apply, Eigen::Index r) {
    double sum = 0.0;
    std::size_t count = 0;
    for_each_value([&](double v) { sum += v; ++count; });
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for_each_value([&](double v) { ss += (v - mean) * (v - mean); });
    const double sd = std::sqrt(ss / static_cast<double>(count));
    if (sd == 0.0 && std::find(report.constant_rois.begin(), report.constant_rois.end(),
                               static_cast<std::size_t>(r)) == report.constant_rois.end())
      report.constant_rois.push_back(static_cast<std::size_t>(r));
    apply(mean, sd == 0.0 ? 1.0 : sd);
  };
  for (Eigen::Index r = 0; r < n_rois; ++r) {
    if (mode == ZScoreMode::kDataset) {
      standardize(
          [&](auto&& f) {
            for (const auto& s : data)
              for (Eigen::Index t = 0; t < s.series.rows(); ++t) f(s.series(t, r));
          },
          [&](double mean, double sd) {
            for (auto& s : data) s.series.col(r) = (s.series.col(r).array() - mean) / sd;
          },
          r);
    } else {
      for (auto& s : data) {
        standardize(
            [&](auto&& f) {
              for (Eigen::Index t = 0; t < s.series.rows(); ++t) f(s.series(t, r));
            },
            [&](double mean, double sd) {
              s.series.col(r) = (s.series.col(r).array() - mean) / sd;
            },
            r);
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Synthetic generation

namespace detail {

inline Eigen::VectorXd ar1(std::size_t n, Rng& rng) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(n));
  const double phi = kArCoefficient;
  x(0) = normal(rng) / std::sqrt(1.0 - phi * phi);
  for (std::size_t t = 1; t < n; ++t)
    x(static_cast<Eigen::Index>(t)) = phi * x(static_cast<Eigen::Index>(t - 1)) + normal(rng);
  return x;
}

}  // namespace detail

/// Class-0 subjects (even index) are independent AR(1) signals per ROI;
/// class-1 subjects (odd index) additionally carry the planted effect on the
/// affected ROIs. Continuous targets draw s ~ U(0, 1) per subject and scale
/// the effect by s. The result is z-scored per ROI over the whole dataset.
inline Dataset generate(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng = substream(spec.seed, "data");
  Dataset data;
  data.reserve(spec.n_subjects);
  const auto T = static_cast<Eigen::Index>(spec.n_timepoints);
  std::size_t source = 0;
  while (source < spec.n_rois &&
         std::find(spec.affected_rois.begin(), spec.affected_rois.end(), source) !=
             spec.affected_rois.end())
    ++source;
  if (source == spec.n_rois) source = 0;

  for (std::size_t i = 0; i < spec.n_subjects; ++i) {
    TimeSeriesSample s;
    s.subject_id = "s" + std::to_string(i);
    s.series.resize(T, static_cast<Eigen::Index>(spec.n_rois));
    for (std::size_t r = 0; r < spec.n_rois; ++r)
      s.series.col(static_cast<Eigen::Index>(r)) = detail::ar1(spec.n_timepoints, rng);
    double strength;
    if (spec.target == TargetKind::kBinary) {
      s.label = static_cast<double>(i % 2);
      strength = s.label;
    } else {
      s.label = uniform(rng, 0.0, 1.0);
      strength = s.label;
    }
    const double amount = spec.effect_size * strength;
    switch (spec.effect) {
      case Effect::kMeanShift:
        for (auto r : spec.affected_rois) s.series.col(static_cast<Eigen::Index>(r)).array() += amount;
        break;
      case Effect::kConnectivityShift: {
        const Eigen::VectorXd shared = detail::ar1(spec.n_timepoints, rng);
        for (auto r : spec.affected_rois) s.series.col(static_cast<Eigen::Index>(r)) += amount * shared;
        break;
      }
      case Effect::kLagShift: {
        const Eigen::VectorXd src = s.series.col(static_cast<Eigen::Index>(source));
        for (auto r : spec.affected_rois) {
          if (r == source) continue;
          for (Eigen::Index t = static_cast<Eigen::Index>(kLag); t < T; ++t)
            s.series(t, static_cast<Eigen::Index>(r)) += amount * src(t - static_cast<Eigen::Index>(kLag));
        }
        break;
      }
    }
    data.push_back(std::move(s));
  }
  zscore(data, ZScoreMode::kDataset);
  return data;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                      : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double parse_number(std::string_view field, const std::string& where) {
  double v = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  QTST_REQUIRE(ec == std::errc() && ptr == last, ErrorCode::kParseError,
               where + ": cannot parse '" + std::string(field) + "'");
  QTST_REQUIRE(std::isfinite(v), ErrorCode::kParseError,
               where + ": non-finite value '" + std::string(field) + "'");
  return v;
}

inline std::string format_number(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::string roi_header(std::size_t n_rois) {
  std::string h;
  for (std::size_t r = 0; r < n_rois; ++r) h += ",roi_" + std::to_string(r);
  return h;
}

inline void check_header(std::string_view line, std::string_view prefix,
                         const std::string& file, std::size_t& n_rois) {
  const auto fields = split_fields(line);
  const auto prefix_fields = split_fields(prefix);
  QTST_REQUIRE(fields.size() > prefix_fields.size(), ErrorCode::kSchemaMismatch,
               file + ": header has no ROI columns");
  for (std::size_t i = 0; i < prefix_fields.size(); ++i)
    QTST_REQUIRE(fields[i] == prefix_fields[i], ErrorCode::kSchemaMismatch,
                 file + ": expected column '" + std::string(prefix_fields[i]) + "', got '" +
                     std::string(fields[i]) + "'");
  const std::size_t rois = fields.size() - prefix_fields.size();
  for (std::size_t r = 0; r < rois; ++r)
    QTST_REQUIRE(fields[prefix_fields.size() + r] == "roi_" + std::to_string(r),
                 ErrorCode::kSchemaMismatch,
                 file + ": expected column 'roi_" + std::to_string(r) + "'");
  if (n_rois == 0) n_rois = rois;
  QTST_REQUIRE(rois == n_rois, ErrorCode::kSchemaMismatch,
               file + ": " + std::to_string(rois) + " ROI columns, expected " +
                   std::to_string(n_rois));
}

inline void check_id(const std::string& id) {
  QTST_REQUIRE(!id.empty(), ErrorCode::kSchemaMismatch, "empty subject id");
  for (char c : id)
    QTST_REQUIRE(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.',
                 ErrorCode::kSchemaMismatch, "subject id '" + id + "' has unsupported characters");
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p);
  QTST_REQUIRE(in.good(), ErrorCode::kIoError, "cannot open " + p.string());
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  QTST_REQUIRE(out.good(), ErrorCode::kIoError, "cannot write " + p.string());
  return out;
}

inline bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

/// Rows of one subject in order, validating the t column.
struct RowBuffer {
  std::vector<std::vector<double>> rows;
};

inline Eigen::MatrixXd to_matrix(const RowBuffer& b, std::size_t n_rois) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(b.rows.size()), static_cast<Eigen::Index>(n_rois));
  for (std::size_t t = 0; t < b.rows.size(); ++t)
    for (std::size_t r = 0; r < n_rois; ++r)
      m(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(r)) = b.rows[t][r];
  return m;
}

}  // namespace detail

inline void write_labels(std::ostream& os, const Dataset& data) {
  os << "subject_id,label\n";
  for (const auto& s : data) os << s.subject_id << ',' << detail::format_number(s.label) << '\n';
}

inline void write_long(std::ostream& os, const Dataset& data) {
  const std::size_t n_rois = data.empty() ? 0 : static_cast<std::size_t>(data.front().series.cols());
  os << "subject_id,t" << detail::roi_header(n_rois) << '\n';
  for (const auto& s : data) {
    for (Eigen::Index t = 0; t < s.series.rows(); ++t) {
      os << s.subject_id << ',' << t;
      for (Eigen::Index r = 0; r < s.series.cols(); ++r)
        os << ',' << detail::format_number(s.series(t, r));
      os << '\n';
    }
  }
}

inline void write_subject(std::ostream& os, const TimeSeriesSample& s) {
  os << "t" << detail::roi_header(static_cast<std::size_t>(s.series.cols())) << '\n';
  for (Eigen::Index t = 0; t < s.series.rows(); ++t) {
    os << t;
    for (Eigen::Index r = 0; r < s.series.cols(); ++r)
      os << ',' << detail::format_number(s.series(t, r));
    os << '\n';
  }
}

enum class CsvFormat { kLong, kPerSubject };

/// Writes labels.csv plus either series.csv (long) or subject_<id>.csv files.
inline void write_csv(const std::filesystem::path& dir, const Dataset& data, CsvFormat format) {
  std::filesystem::create_directories(dir);
  {
    auto out = detail::open_out(dir / "labels.csv");
    write_labels(out, data);
  }
  if (format == CsvFormat::kLong) {
    auto out = detail::open_out(dir / "series.csv");
    write_long(out, data);
  } else {
    for (const auto& s : data) {
      detail::check_id(s.subject_id);
      auto out = detail::open_out(dir / ("subject_" + s.subject_id + ".csv"));
      write_subject(out, s);
    }
  }
}

struct CsvSchema {
  CsvFormat format = CsvFormat::kLong;
  /// Long format: the series file. Per-subject format: the directory.
  std::filesystem::path series_path;
  std::filesystem::path labels_path;
  /// Truncate subjects to the shortest series instead of rejecting.
  bool truncate = false;
  ZScoreMode zscore = ZScoreMode::kDataset;
};

inline std::vector<std::pair<std::string, double>> read_labels(const std::filesystem::path& p) {
  auto in = detail::open_in(p);
  std::string line;
  QTST_REQUIRE(detail::next_line(in, line) && line == "subject_id,label",
               ErrorCode::kSchemaMismatch, p.string() + ": expected header 'subject_id,label'");
  std::vector<std::pair<std::string, double>> out;
  std::size_t lineno = 1;
  while (detail::next_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split_fields(line);
    const std::string where = p.string() + ":" + std::to_string(lineno);
    QTST_REQUIRE(f.size() == 2, ErrorCode::kParseError, where + ": expected 2 fields");
    std::string id(f[0]);
    detail::check_id(id);
    out.emplace_back(id, detail::parse_number(f[1], where + " column label"));
  }
  return out;
}

inline Dataset load_csv(const CsvSchema& schema) {
  const auto labels = read_labels(schema.labels_path);
  std::map<std::string, detail::RowBuffer> buffers;
  std::size_t n_rois = 0;

  auto parse_row = [&](std::string_view line, std::size_t skip, const std::string& where,
                       detail::RowBuffer& buf) {
    const auto f = detail::split_fields(line);
    QTST_REQUIRE(f.size() == skip + 1 + n_rois, ErrorCode::kParseError,
                 where + ": expected " + std::to_string(skip + 1 + n_rois) + " fields, got " +
                     std::to_string(f.size()));
    const double t = detail::parse_number(f[skip], where + " column t");
    QTST_REQUIRE(t == static_cast<double>(buf.rows.size()), ErrorCode::kParseError,
                 where + ": t=" + std::string(f[skip]) + " out of sequence");
    std::vector<double> row(n_rois);
    for (std::size_t r = 0; r < n_rois; ++r)
      row[r] = detail::parse_number(f[skip + 1 + r], where + " column roi_" + std::to_string(r));
    buf.rows.push_back(std::move(row));
  };

  if (schema.format == CsvFormat::kLong) {
    auto in = detail::open_in(schema.series_path);
    std::string line;
    const std::string file = schema.series_path.string();
    QTST_REQUIRE(detail::next_line(in, line), ErrorCode::kSchemaMismatch, file + ": empty file");
    detail::check_header(line, "subject_id,t", file, n_rois);
    std::size_t lineno = 1;
    while (detail::next_line(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto comma = line.find(',');
      const std::string id = line.substr(0, comma);
      parse_row(line, 1, file + ":" + std::to_string(lineno), buffers[id]);
    }
  } else {
    for (const auto& [id, label] : labels) {
      const auto p = schema.series_path / ("subject_" + id + ".csv");
      auto in = detail::open_in(p);
      std::string line;
      QTST_REQUIRE(detail::next_line(in, line), ErrorCode::kSchemaMismatch,
                   p.string() + ": empty file");
      detail::check_header(line, "t", p.string(), n_rois);
      std::size_t lineno = 1;
      auto& buf = buffers[id];
      while (detail::next_line(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        parse_row(line, 0, p.string() + ":" + std::to_string(lineno), buf);
      }
    }
  }

  QTST_REQUIRE(buffers.size() == labels.size(), ErrorCode::kSchemaMismatch,
               std::to_string(buffers.size()) + " subjects with series, " +
                   std::to_string(labels.size()) + " labels");
  Dataset data;
  std::size_t min_t = std::numeric_limits<std::size_t>::max();
  std::size_t max_t = 0;
  for (const auto& [id, label] : labels) {
    auto it = buffers.find(id);
    QTST_REQUIRE(it != buffers.end(), ErrorCode::kSchemaMismatch,
                 "subject '" + id + "' has a label but no series");
    QTST_REQUIRE(!it->second.rows.empty(), ErrorCode::kSchemaMismatch,
                 "subject '" + id + "' has no timepoints");
    min_t = std::min(min_t, it->second.rows.size());
    max_t = std::max(max_t, it->second.rows.size());
    data.push_back({id, detail::to_matrix(it->second, n_rois), label});
  }
  if (min_t != max_t) {
    QTST_REQUIRE(schema.truncate, ErrorCode::kRaggedSeries,
                 "subjects have between " + std::to_string(min_t) + " and " +
                     std::to_string(max_t) + " timepoints");
    for (auto& s : data) s.series.conservativeResize(static_cast<Eigen::Index>(min_t), Eigen::NoChange);
  }
  zscore(data, schema.zscore);
  return data;
}

// ---------------------------------------------------------------------------
// Splits and model input preparation

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

inline Dataset subset(const Dataset& data, const std::vector<std::size_t>& idx) {
  Dataset out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(data.at(i));
  return out;
}

/// Deterministic shuffle-and-cut. Partition sizes are round(f * N) for train
/// and validation; test takes the rest. With `stratify`, each class is
/// shuffled separately and the classes are interleaved by relative rank, so
/// every contiguous cut keeps the class proportions.
inline Split split(const Dataset& data, std::array<double, 3> fractions, std::uint64_t seed,
                   bool stratify) {
  for (double f : fractions)
    QTST_REQUIRE(f >= 0.0, ErrorCode::kInvalidArgument, "negative split fraction");
  QTST_REQUIRE(std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) <= 1e-9,
               ErrorCode::kInvalidArgument, "split fractions must sum to 1");
  const std::size_t n = data.size();
  const auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n)));
  const auto n_val = std::min(n - std::min(n, n_train),
                              static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(n))));
  Rng rng = substream(seed, "split");

  std::vector<std::size_t> order;
  if (stratify) {
    std::map<double, std::vector<std::size_t>> classes;
    for (std::size_t i = 0; i < n; ++i) classes[data[i].label].push_back(i);
    const std::size_t used_parts = (fractions[0] > 0) + (fractions[1] > 0) + (fractions[2] > 0);
    std::vector<std::pair<double, std::size_t>> keyed;
    for (auto& [label, members] : classes) {
      QTST_REQUIRE(members.size() >= used_parts, ErrorCode::kTooFewPerClass,
                   "class " + detail::format_number(label) + " has " +
                       std::to_string(members.size()) + " members for " +
                       std::to_string(used_parts) + " partitions");
      std::shuffle(members.begin(), members.end(), rng);
      for (std::size_t k = 0; k < members.size(); ++k)
        keyed.emplace_back((static_cast<double>(k) + 0.5) / static_cast<double>(members.size()),
                           members[k]);
    }
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& kv : keyed) order.push_back(kv.second);
  } else {
    order.resize(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
  }

  Split out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(n, n_train)));
  out.val.assign(order.begin() + static_cast<std::ptrdiff_t>(out.train.size()),
                 order.begin() + static_cast<std::ptrdiff_t>(out.train.size() + n_val));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(out.train.size() + n_val), order.end());
  return out;
}

/// Window-averages `series` (T x R) into `length` contiguous segments; segment
/// w covers rows [floor(w T / length), floor((w + 1) T / length)).
inline Eigen::MatrixXd segment(const Eigen::MatrixXd& series, std::size_t length) {
  const auto T = static_cast<std::size_t>(series.rows());
  QTST_REQUIRE(length >= 1 && T >= length, ErrorCode::kShapeMismatch,
               "cannot segment " + std::to_string(T) + " timepoints into " +
                   std::to_string(length) + " steps");
  if (T == length) return series;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(length), series.cols());
  for (std::size_t w = 0; w < length; ++w) {
    const std::size_t lo = w * T / length;
    const std::size_t hi = (w + 1) * T / length;
    out.row(static_cast<Eigen::Index>(w)) =
        series.middleRows(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(hi - lo))
            .colwise()
            .mean();
  }
  return out;
}

}  // namespace qtst::dataio
