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
 * @file experiment.hpp
 * Config-driven experiments: strict JSON configs, per-seed training runs,
 * checkpoints, metrics files, attribution exports, and model comparison.
 *
 * Run directory layout (one per config):
 *   config.json     effective configuration
 *   manifest.json   format versions and seeds
 *   metrics.json    per-seed history and metrics plus a summary
 *   seed_<s>/checkpoint.json
 */
#pragma once

#include <cmath>
#include <concepts>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "qtst/attention.hpp"
#include "qtst/attribution.hpp"
#include "qtst/core.hpp"
#include "qtst/dataio.hpp"
#include "qtst/metrics.hpp"
#include "qtst/model.hpp"
#include "qtst/train.hpp"

namespace qtst::experiment {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline constexpr int kConfigVersion = 1;
inline constexpr int kCheckpointVersion = 1;
inline constexpr int kMetricsVersion = 1;
inline constexpr const char* kCheckpointFormat = "qtst-checkpoint";
inline constexpr const char* kMetricsFormat = "qtst-metrics";

/// Published parameter counts of large reference models, for reports only.
struct ReferenceCount {
  const char* name;
  double parameters;
};
inline constexpr ReferenceCount kReferenceCounts[] = {
    {"vanilla_transformer", 1.68e6},
    {"brain_network_transformer", 11.2e6},
    {"bolt", 1.68e6},
    {"quantum_time_series_transformer", 22e3},
};

enum class ModelKind { kQuantum, kBaseline };

struct DataConfig {
  bool synthetic = true;
  dataio::SyntheticSpec spec;
  dataio::CsvFormat write_format = dataio::CsvFormat::kLong;
  dataio::CsvSchema csv;
};

struct AttributionConfig {
  attribution::BaselineSpec baseline = attribution::BaselineSpec::kFeatureMean;
  attribution::Granularity granularity = attribution::Granularity::kRoi;
  std::size_t top_k = 20;
};

struct ExperimentConfig {
  std::string name;
  metrics::Task task = metrics::Task::kBinaryClassification;
  ModelKind model = ModelKind::kQuantum;
  model::ModelConfig quantum;
  attention::AttentionConfig baseline;
  DataConfig data;
  std::array<double, 3> split{0.7, 0.15, 0.15};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  train::TrainOptions training;
  AttributionConfig attribution;
  fs::path output_dir = "runs/default";

  std::string label() const {
    if (!name.empty()) return name;
    return model == ModelKind::kQuantum ? "quantum" : "baseline";
  }
};

// ---------------------------------------------------------------------------
// Enum names

namespace detail {

template <class E>
struct EnumNames;

template <>
struct EnumNames<metrics::Task> {
  static constexpr std::pair<metrics::Task, const char*> kItems[] = {
      {metrics::Task::kBinaryClassification, "binary_classification"},
      {metrics::Task::kRegression, "regression"}};
};
template <>
struct EnumNames<ModelKind> {
  static constexpr std::pair<ModelKind, const char*> kItems[] = {{ModelKind::kQuantum, "quantum"},
                                                                 {ModelKind::kBaseline, "baseline"}};
};
template <>
struct EnumNames<model::ObservableMode> {
  static constexpr std::pair<model::ObservableMode, const char*> kItems[] = {
      {model::ObservableMode::kPauliZ, "pauli_z"},
      {model::ObservableMode::kTrainableHermitian, "trainable_hermitian"}};
};
template <>
struct EnumNames<dataio::Effect> {
  static constexpr std::pair<dataio::Effect, const char*> kItems[] = {
      {dataio::Effect::kMeanShift, "mean_shift"},
      {dataio::Effect::kConnectivityShift, "connectivity_shift"},
      {dataio::Effect::kLagShift, "lag_shift"}};
};
template <>
struct EnumNames<dataio::CsvFormat> {
  static constexpr std::pair<dataio::CsvFormat, const char*> kItems[] = {
      {dataio::CsvFormat::kLong, "long"}, {dataio::CsvFormat::kPerSubject, "per_subject"}};
};
template <>
struct EnumNames<dataio::ZScoreMode> {
  static constexpr std::pair<dataio::ZScoreMode, const char*> kItems[] = {
      {dataio::ZScoreMode::kDataset, "dataset"},
      {dataio::ZScoreMode::kPerSubject, "per_subject"},
      {dataio::ZScoreMode::kNone, "none"}};
};
template <>
struct EnumNames<attribution::BaselineSpec> {
  static constexpr std::pair<attribution::BaselineSpec, const char*> kItems[] = {
      {attribution::BaselineSpec::kZeros, "zeros"},
      {attribution::BaselineSpec::kFeatureMean, "feature_mean"}};
};
template <>
struct EnumNames<attribution::Granularity> {
  static constexpr std::pair<attribution::Granularity, const char*> kItems[] = {
      {attribution::Granularity::kRoi, "roi"},
      {attribution::Granularity::kTimestep, "timestep"},
      {attribution::Granularity::kRoiTimestep, "roi_timestep"}};
};

template <class E>
std::string name_of(E e) {
  for (const auto& [v, n] : EnumNames<E>::kItems)
    if (v == e) return n;
  return "?";
}

/// Strict view of one JSON object: typed getters, unknown keys rejected.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    QTST_REQUIRE(j.is_object(), ErrorCode::kConfigError, where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    read(j_.at(key), path_ + "." + key, out);
  }

  Reader child(const std::string& key) {
    seen_.insert(key);
    return Reader(j_.at(key), path_ + "." + key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      QTST_REQUIRE(seen_.count(key), ErrorCode::kConfigError,
                   "unknown key '" + path_ + "." + key + "'");
  }

 private:
  std::string where() const { return "'" + path_ + "'"; }

  static void fail(const std::string& path, const std::string& what) {
    throw Error(ErrorCode::kConfigError, "'" + path + "' must be " + what);
  }
  template <std::unsigned_integral T>
  static void read(const json& v, const std::string& p, T& out) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      fail(p, "a non-negative integer");
    out = v.get<T>();
  }
  static void read(const json& v, const std::string& p, double& out) {
    if (!v.is_number()) fail(p, "a number");
    out = v.get<double>();
  }
  static void read(const json& v, const std::string& p, bool& out) {
    if (!v.is_boolean()) fail(p, "true or false");
    out = v.get<bool>();
  }
  static void read(const json& v, const std::string& p, std::string& out) {
    if (!v.is_string()) fail(p, "a string");
    out = v.get<std::string>();
  }
  static void read(const json& v, const std::string& p, fs::path& out) {
    std::string s;
    read(v, p, s);
    out = s;
  }
  template <class T>
  static void read(const json& v, const std::string& p, std::vector<T>& out) {
    if (!v.is_array()) fail(p, "an array");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      T x{};
      read(v[i], p + "[" + std::to_string(i) + "]", x);
      out.push_back(x);
    }
  }
  static void read(const json& v, const std::string& p, std::array<double, 3>& out) {
    if (!v.is_array() || v.size() != 3) fail(p, "an array of 3 numbers");
    for (std::size_t i = 0; i < 3; ++i) read(v[i], p + "[" + std::to_string(i) + "]", out[i]);
  }
  template <class E>
    requires std::is_enum_v<E>
  static void read(const json& v, const std::string& p, E& out) {
    std::string s;
    read(v, p, s);
    std::string options;
    for (const auto& [value, n] : EnumNames<E>::kItems) {
      if (s == n) {
        out = value;
        return;
      }
      options += options.empty() ? n : std::string(", ") + n;
    }
    fail(p, "one of: " + options);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Config (de)serialization

inline ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  detail::Reader r(j, "config");
  int version = kConfigVersion;
  if (r.has("version")) {
    std::size_t v = 0;
    r.get("version", v);
    version = static_cast<int>(v);
  }
  QTST_REQUIRE(version == kConfigVersion, ErrorCode::kVersionMismatch,
               "config version " + std::to_string(version) + " is not supported");
  r.get("name", c.name);
  r.get("task", c.task);
  r.get("model", c.model);
  if (r.has("quantum")) {
    auto q = r.child("quantum");
    q.get("n_data_qubits", c.quantum.n_data_qubits);
    q.get("ansatz_layers", c.quantum.ansatz_layers);
    q.get("seq_len", c.quantum.seq_len);
    q.get("embed_dim", c.quantum.embed_dim);
    q.get("poly_degree", c.quantum.poly_degree);
    q.get("n_outputs", c.quantum.n_outputs);
    q.get("ff_layers", c.quantum.ff_layers);
    q.get("observable_mode", c.quantum.observable_mode);
    q.finish();
  }
  if (r.has("baseline")) {
    auto b = r.child("baseline");
    b.get("embed_dim", c.baseline.embed_dim);
    b.get("key_dim", c.baseline.key_dim);
    b.get("n_heads", c.baseline.n_heads);
    b.get("n_layers", c.baseline.n_layers);
    b.get("seq_len", c.baseline.seq_len);
    b.get("ffn_dim", c.baseline.ffn_dim);
    b.get("positional_encoding", c.baseline.positional_encoding);
    b.finish();
  }
  if (r.has("data")) {
    auto d = r.child("data");
    QTST_REQUIRE(!(d.has("synthetic") && d.has("csv")), ErrorCode::kConfigError,
                 "'config.data' takes either 'synthetic' or 'csv', not both");
    if (d.has("csv")) {
      c.data.synthetic = false;
      auto s = d.child("csv");
      s.get("format", c.data.csv.format);
      s.get("series", c.data.csv.series_path);
      s.get("labels", c.data.csv.labels_path);
      s.get("truncate", c.data.csv.truncate);
      s.get("zscore", c.data.csv.zscore);
      s.finish();
      QTST_REQUIRE(!c.data.csv.series_path.empty() && !c.data.csv.labels_path.empty(),
                   ErrorCode::kConfigError, "'config.data.csv' needs 'series' and 'labels'");
    }
    if (d.has("synthetic")) {
      auto s = d.child("synthetic");
      s.get("n_subjects", c.data.spec.n_subjects);
      s.get("n_rois", c.data.spec.n_rois);
      s.get("n_timepoints", c.data.spec.n_timepoints);
      s.get("effect", c.data.spec.effect);
      s.get("effect_size", c.data.spec.effect_size);
      s.get("affected_rois", c.data.spec.affected_rois);
      s.get("write_format", c.data.write_format);
      s.finish();
    }
    d.finish();
  }
  r.get("split", c.split);
  r.get("seeds", c.seeds);
  QTST_REQUIRE(!c.seeds.empty(), ErrorCode::kConfigError, "'config.seeds' must not be empty");
  if (r.has("training")) {
    auto t = r.child("training");
    t.get("epochs", c.training.epochs);
    t.get("lr", c.training.lr);
    t.get("batch_size", c.training.batch_size);
    t.get("patience", c.training.patience);
    t.get("beta1", c.training.beta1);
    t.get("beta2", c.training.beta2);
    t.finish();
  }
  if (r.has("attribution")) {
    auto a = r.child("attribution");
    a.get("baseline", c.attribution.baseline);
    a.get("granularity", c.attribution.granularity);
    a.get("top_k", c.attribution.top_k);
    a.finish();
  }
  r.get("output_dir", c.output_dir);
  r.finish();

  c.quantum.task = c.task;
  c.baseline.task = c.task;
  c.data.spec.target = c.task == metrics::Task::kBinaryClassification ? dataio::TargetKind::kBinary
                                                                      : dataio::TargetKind::kContinuous;
  if (c.data.synthetic) {
    c.quantum.input_dim = c.data.spec.n_rois;
    c.baseline.input_dim = c.data.spec.n_rois;
  }
  try {
    c.training.validate();
    c.data.spec.validate();
    if (c.model == ModelKind::kQuantum)
      c.quantum.validate();
    else
      c.baseline.validate();
    double total = 0.0;
    for (double f : c.split) {
      QTST_REQUIRE(f >= 0.0, ErrorCode::kConfigError, "split fractions must be >= 0");
      total += f;
    }
    QTST_REQUIRE(std::abs(total - 1.0) <= 1e-9, ErrorCode::kConfigError,
                 "split fractions must sum to 1");
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfigError, e.what());
  }
  return c;
}

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["version"] = kConfigVersion;
  if (!c.name.empty()) j["name"] = c.name;
  j["task"] = detail::name_of(c.task);
  j["model"] = detail::name_of(c.model);
  j["quantum"] = {{"n_data_qubits", c.quantum.n_data_qubits},
                  {"ansatz_layers", c.quantum.ansatz_layers},
                  {"seq_len", c.quantum.seq_len},
                  {"embed_dim", c.quantum.embed_dim},
                  {"poly_degree", c.quantum.poly_degree},
                  {"n_outputs", c.quantum.n_outputs},
                  {"ff_layers", c.quantum.ff_layers},
                  {"observable_mode", detail::name_of(c.quantum.observable_mode)}};
  j["baseline"] = {{"embed_dim", c.baseline.embed_dim},
                   {"key_dim", c.baseline.key_dim},
                   {"n_heads", c.baseline.n_heads},
                   {"n_layers", c.baseline.n_layers},
                   {"seq_len", c.baseline.seq_len},
                   {"ffn_dim", c.baseline.ffn_dim},
                   {"positional_encoding", c.baseline.positional_encoding}};
  if (c.data.synthetic) {
    j["data"]["synthetic"] = {{"n_subjects", c.data.spec.n_subjects},
                              {"n_rois", c.data.spec.n_rois},
                              {"n_timepoints", c.data.spec.n_timepoints},
                              {"effect", detail::name_of(c.data.spec.effect)},
                              {"effect_size", c.data.spec.effect_size},
                              {"affected_rois", c.data.spec.affected_rois},
                              {"write_format", detail::name_of(c.data.write_format)}};
  } else {
    j["data"]["csv"] = {{"format", detail::name_of(c.data.csv.format)},
                        {"series", c.data.csv.series_path.string()},
                        {"labels", c.data.csv.labels_path.string()},
                        {"truncate", c.data.csv.truncate},
                        {"zscore", detail::name_of(c.data.csv.zscore)}};
  }
  j["split"] = c.split;
  j["seeds"] = c.seeds;
  j["training"] = {{"epochs", c.training.epochs},       {"lr", c.training.lr},
                   {"batch_size", c.training.batch_size}, {"patience", c.training.patience},
                   {"beta1", c.training.beta1},         {"beta2", c.training.beta2}};
  j["attribution"] = {{"baseline", detail::name_of(c.attribution.baseline)},
                      {"granularity", detail::name_of(c.attribution.granularity)},
                      {"top_k", c.attribution.top_k}};
  j["output_dir"] = c.output_dir.string();
  return j;
}

inline json read_json_file(const fs::path& p, ErrorCode missing = ErrorCode::kIoError) {
  std::ifstream in(p);
  QTST_REQUIRE(in.good(), missing, "cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, p.string() + ": " + e.what());
  }
}

inline ExperimentConfig load_config(const fs::path& p) {
  json j;
  try {
    j = read_json_file(p, ErrorCode::kConfigError);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfigError, e.what());
  }
  return parse_config(j);
}

/// Writes `j` with a trailing newline, replacing any existing file.
inline void write_json_file(const fs::path& p, const json& j) {
  std::ofstream out(p, std::ios::binary);
  QTST_REQUIRE(out.good(), ErrorCode::kIoError, "cannot write " + p.string());
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Data and models

/// Dataset for one seed (synthetic data is regenerated from the seed).
inline dataio::Dataset load_data(const ExperimentConfig& c, std::uint64_t seed) {
  if (c.data.synthetic) {
    auto spec = c.data.spec;
    spec.seed = seed;
    return dataio::generate(spec);
  }
  return dataio::load_csv(c.data.csv);
}

struct Partitions {
  dataio::Dataset train, val, test;
};

inline Partitions partition(const ExperimentConfig& c, const dataio::Dataset& data, std::uint64_t seed) {
  const auto s = dataio::split(data, c.split, seed, c.task == metrics::Task::kBinaryClassification);
  return {dataio::subset(data, s.train), dataio::subset(data, s.val), dataio::subset(data, s.test)};
}

using AnyModel = std::variant<model::QuantumModel, attention::BaselineModel>;

/// Fresh model for `seed`; input width follows the data.
inline AnyModel make_model(ExperimentConfig c, std::size_t input_dim, std::uint64_t seed) {
  if (c.model == ModelKind::kQuantum) {
    c.quantum.input_dim = input_dim;
    return model::QuantumModel::initialized(c.quantum, seed);
  }
  c.baseline.input_dim = input_dim;
  return attention::BaselineModel::initialized(c.baseline, seed);
}

inline std::size_t input_width(const dataio::Dataset& data) {
  QTST_REQUIRE(!data.empty(), ErrorCode::kDataEmpty, "dataset is empty");
  return static_cast<std::size_t>(data.front().series.cols());
}

// ---------------------------------------------------------------------------
// JSON helpers for results

namespace detail {

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json eval_json(metrics::Task task, const train::EvalMetrics& m) {
  json j;
  j["loss"] = m.loss;
  if (task == metrics::Task::kBinaryClassification) {
    j["auroc"] = optional_number(m.auroc);
    j["auroc_degenerate"] = m.auroc_degenerate;
  } else {
    j["mae"] = optional_number(m.mae);
  }
  return j;
}

inline json history_json(const std::vector<train::EpochRecord>& h) {
  json a = json::array();
  for (const auto& r : h)
    a.push_back({{"epoch", r.epoch},
                 {"train_loss", r.train_loss},
                 {"val_loss", finite_or_null(r.val_loss)},
                 {"val_metric", optional_number(r.val_metric)}});
  return a;
}

inline std::vector<train::EpochRecord> history_from_json(const json& a) {
  std::vector<train::EpochRecord> h;
  for (const auto& r : a) {
    train::EpochRecord e;
    e.epoch = r.at("epoch").get<std::size_t>();
    e.train_loss = r.at("train_loss").get<double>();
    e.val_loss = r.at("val_loss").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                             : r.at("val_loss").get<double>();
    if (!r.at("val_metric").is_null()) e.val_metric = r.at("val_metric").get<double>();
    h.push_back(e);
  }
  return h;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Checkpoints

inline json checkpoint_json(const ExperimentConfig& c, std::uint64_t seed, std::size_t input_dim,
                            const train::TrainState& s) {
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["config"] = to_json(c);
  j["seed"] = seed;
  j["input_dim"] = input_dim;
  j["epoch"] = s.epoch;
  j["params"] = s.params;
  j["best_params"] = s.best_params;
  j["best_epoch"] = s.best_epoch;
  j["best_score"] = detail::finite_or_null(s.best_score);
  j["optimizer"] = {{"m", s.optimizer.m}, {"v", s.optimizer.v}, {"step", s.optimizer.step}};
  j["history"] = detail::history_json(s.history);
  return j;
}

struct Checkpoint {
  ExperimentConfig config;
  std::uint64_t seed = 0;
  std::size_t input_dim = 0;
  train::TrainState state;
};

inline Checkpoint read_checkpoint(const fs::path& p) {
  QTST_REQUIRE(fs::exists(p), ErrorCode::kConfigError, "checkpoint " + p.string() + " not found");
  const json j = read_json_file(p);
  QTST_REQUIRE(j.value("format", "") == kCheckpointFormat, ErrorCode::kVersionMismatch,
               p.string() + " is not a checkpoint");
  QTST_REQUIRE(j.value("version", 0) == kCheckpointVersion, ErrorCode::kVersionMismatch,
               p.string() + ": checkpoint version " + std::to_string(j.value("version", 0)) +
                   " is not supported");
  Checkpoint ck;
  try {
    ck.config = parse_config(j.at("config"));
    ck.seed = j.at("seed").get<std::uint64_t>();
    ck.input_dim = j.at("input_dim").get<std::size_t>();
    auto& s = ck.state;
    s.epoch = j.at("epoch").get<std::size_t>();
    s.seed = ck.seed;
    s.params = j.at("params").get<std::vector<double>>();
    s.best_params = j.at("best_params").get<std::vector<double>>();
    s.best_epoch = j.at("best_epoch").get<std::size_t>();
    s.best_score = j.at("best_score").is_null() ? -std::numeric_limits<double>::infinity()
                                                : j.at("best_score").get<double>();
    s.optimizer.m = j.at("optimizer").at("m").get<std::vector<double>>();
    s.optimizer.v = j.at("optimizer").at("v").get<std::vector<double>>();
    s.optimizer.step = j.at("optimizer").at("step").get<std::size_t>();
    s.history = detail::history_from_json(j.at("history"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaMismatch, p.string() + ": " + e.what());
  }
  return ck;
}

/// Model restored from a checkpoint, holding its best (or final) parameters.
inline AnyModel restore_model(const Checkpoint& ck) {
  AnyModel m = make_model(ck.config, ck.input_dim, ck.seed);
  const auto& p = ck.state.best_params.empty() ? ck.state.params : ck.state.best_params;
  std::visit([&](auto& model) {
    QTST_REQUIRE(p.size() == model.parameter_count(), ErrorCode::kSchemaMismatch,
                 "checkpoint has " + std::to_string(p.size()) + " parameters, model needs " +
                     std::to_string(model.parameter_count()));
    model.set_parameters(p);
  }, m);
  return m;
}

// ---------------------------------------------------------------------------
// Runs

inline fs::path seed_dir(const fs::path& root, std::uint64_t seed) {
  return root / ("seed_" + std::to_string(seed));
}

/// Refuses to overwrite an existing run unless `force`.
inline void prepare_output(const fs::path& dir, bool force) {
  if (fs::exists(dir / "manifest.json") || fs::exists(dir / "labels.csv"))
    QTST_REQUIRE(force, ErrorCode::kConfigError,
                 dir.string() + " already holds results; pass --force to overwrite");
  std::error_code ec;
  fs::create_directories(dir, ec);
  QTST_REQUIRE(!ec, ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());
}

inline json manifest_json(const ExperimentConfig& c, const std::string& command) {
  return {{"command", command},
          {"config_version", kConfigVersion},
          {"checkpoint_format", kCheckpointFormat},
          {"checkpoint_version", kCheckpointVersion},
          {"metrics_format", kMetricsFormat},
          {"metrics_version", kMetricsVersion},
          {"seeds", c.seeds}};
}

struct SeedResult {
  std::uint64_t seed = 0;
  train::TrainState state;
  train::EvalMetrics train, val, test;
  bool has_val = false, has_test = false;
  double generalization_gap = std::numeric_limits<double>::quiet_NaN();
};

inline json seed_json(metrics::Task task, const SeedResult& r) {
  json j;
  j["seed"] = r.seed;
  j["epochs_run"] = r.state.history.size();
  j["best_epoch"] = r.state.best_epoch;
  j["train"] = detail::eval_json(task, r.train);
  j["val"] = r.has_val ? detail::eval_json(task, r.val) : json(nullptr);
  j["test"] = r.has_test ? detail::eval_json(task, r.test) : json(nullptr);
  j["generalization_gap"] = detail::finite_or_null(r.generalization_gap);
  j["history"] = detail::history_json(r.state.history);
  return j;
}

inline std::string format_mean_std(const metrics::MeanStd& m) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f ± %.4f", m.mean, m.std);
  return buf;
}

/// Mean and sample std of one per-seed quantity (null when any seed lacks it).
inline json summarize(const std::vector<std::optional<double>>& values) {
  std::vector<double> v;
  for (const auto& x : values) {
    if (!x) return nullptr;
    v.push_back(*x);
  }
  if (v.empty()) return nullptr;
  const auto m = metrics::mean_std(v);
  return {{"mean", m.mean}, {"std", m.std}, {"n", m.n}, {"formatted", format_mean_std(m)}};
}

inline std::size_t parameter_count(const ExperimentConfig& c, std::size_t input_dim) {
  if (c.model == ModelKind::kQuantum) {
    auto q = c.quantum;
    q.input_dim = input_dim;
    return model::count_parameters(q);
  }
  auto b = c.baseline;
  b.input_dim = input_dim;
  return attention::count_parameters(b);
}

inline json metrics_json(const ExperimentConfig& c, std::size_t input_dim,
                         const std::vector<SeedResult>& results) {
  json j;
  j["format"] = kMetricsFormat;
  j["version"] = kMetricsVersion;
  j["name"] = c.label();
  j["model"] = detail::name_of(c.model);
  j["task"] = detail::name_of(c.task);
  j["parameter_count"] = parameter_count(c, input_dim);
  json runs = json::array();
  for (const auto& r : results) runs.push_back(seed_json(c.task, r));
  j["runs"] = runs;

  const bool cls = c.task == metrics::Task::kBinaryClassification;
  std::vector<std::optional<double>> test_metric, val_metric, test_loss, gap, best_epoch;
  for (const auto& r : results) {
    test_metric.push_back(r.has_test ? (cls ? r.test.auroc : r.test.mae) : std::nullopt);
    val_metric.push_back(r.has_val ? (cls ? r.val.auroc : r.val.mae) : std::nullopt);
    test_loss.push_back(r.has_test ? std::optional(r.test.loss) : std::nullopt);
    gap.push_back(std::isfinite(r.generalization_gap) ? std::optional(r.generalization_gap) : std::nullopt);
    best_epoch.push_back(static_cast<double>(r.state.best_epoch));
  }
  const std::string metric = cls ? "auroc" : "mae";
  j["summary"] = {{"metric", metric},
                  {"test_" + metric, summarize(test_metric)},
                  {"val_" + metric, summarize(val_metric)},
                  {"test_loss", summarize(test_loss)},
                  {"generalization_gap", summarize(gap)},
                  {"epochs_to_best_val", summarize(best_epoch)}};
  return j;
}

/// Trains one seed, writing its checkpoint under `root`. With `resume`, training
/// continues from that state for `config.training.epochs` more epochs.
inline SeedResult run_seed(const ExperimentConfig& c, std::uint64_t seed, const fs::path& root,
                           std::optional<Checkpoint> resume = std::nullopt) {
  const auto data = load_data(c, seed);
  const auto parts = partition(c, data, seed);
  const std::size_t input_dim = input_width(data);
  AnyModel model = make_model(c, input_dim, seed);
  auto opts = c.training;
  opts.seed = seed;
  SeedResult r;
  r.seed = seed;
  std::visit(
      [&](auto& m) {
        std::optional<train::TrainState> prior;
        if (resume) prior = resume->state;
        r.state = train::train(m, parts.train, parts.val, opts, prior);
        r.train = train::evaluate(m, parts.train);
        if (!parts.val.empty()) {
          r.has_val = true;
          r.val = train::evaluate(m, parts.val);
        }
        if (!parts.test.empty()) {
          r.has_test = true;
          r.test = train::evaluate(m, parts.test);
          r.generalization_gap = r.test.loss - r.train.loss;
        }
      },
      model);
  const fs::path dir = seed_dir(root, seed);
  fs::create_directories(dir);
  write_json_file(dir / "checkpoint.json", checkpoint_json(c, seed, input_dim, r.state));
  return r;
}

/// Trains every seed of `c` into `c.output_dir` and returns the metrics JSON.
inline json run_training(const ExperimentConfig& c, bool force, const std::string& command = "train") {
  prepare_output(c.output_dir, force);
  write_json_file(c.output_dir / "config.json", to_json(c));
  std::vector<SeedResult> results;
  std::size_t input_dim = 0;
  for (auto seed : c.seeds) {
    results.push_back(run_seed(c, seed, c.output_dir));
    if (input_dim == 0) input_dim = input_width(load_data(c, seed));
  }
  const json m = metrics_json(c, input_dim, results);
  write_json_file(c.output_dir / "metrics.json", m);
  write_json_file(c.output_dir / "manifest.json", manifest_json(c, command));
  return m;
}

/// Continues training from a checkpoint; epoch numbering carries on.
inline json resume_training(const fs::path& checkpoint, std::size_t extra_epochs, const fs::path& out,
                            bool force) {
  auto ck = read_checkpoint(checkpoint);
  auto c = ck.config;
  c.training.epochs = extra_epochs;
  c.seeds = {ck.seed};
  c.output_dir = out;
  prepare_output(out, force);
  write_json_file(out / "config.json", to_json(c));
  const std::size_t input_dim = ck.input_dim;
  std::vector<SeedResult> results{run_seed(c, ck.seed, out, std::move(ck))};
  const json m = metrics_json(c, input_dim, results);
  write_json_file(out / "metrics.json", m);
  write_json_file(out / "manifest.json", manifest_json(c, "train --resume"));
  return m;
}

/// Re-evaluates a checkpoint on its seed's partitions.
inline json evaluate_checkpoint(const fs::path& checkpoint) {
  const auto ck = read_checkpoint(checkpoint);
  const auto& c = ck.config;
  const auto data = load_data(c, ck.seed);
  const auto parts = partition(c, data, ck.seed);
  AnyModel model = restore_model(ck);
  SeedResult r;
  r.seed = ck.seed;
  r.state = ck.state;
  std::visit(
      [&](auto& m) {
        r.train = train::evaluate(m, parts.train);
        if (!parts.val.empty()) {
          r.has_val = true;
          r.val = train::evaluate(m, parts.val);
        }
        if (!parts.test.empty()) {
          r.has_test = true;
          r.test = train::evaluate(m, parts.test);
          r.generalization_gap = r.test.loss - r.train.loss;
        }
      },
      model);
  return metrics_json(c, ck.input_dim, {r});
}

struct AttributionRun {
  std::vector<attribution::AttributionResult> results;
  std::vector<attribution::BeeswarmRow> top;
};

/// Occlusion attributions of a checkpointed model on its seed's test
/// partition (all data when the test partition is empty); the baseline
/// values come from the training partition.
inline AttributionRun attribute_checkpoint(const fs::path& checkpoint) {
  const auto ck = read_checkpoint(checkpoint);
  const auto& c = ck.config;
  const auto data = load_data(c, ck.seed);
  const auto parts = partition(c, data, ck.seed);
  const auto& targets = parts.test.empty() ? data : parts.test;
  const auto base = attribution::baseline_values(parts.train.empty() ? data : parts.train,
                                                 c.attribution.baseline);
  AnyModel model = restore_model(ck);
  AttributionRun out;
  const std::string id = c.label() + "/seed_" + std::to_string(ck.seed);
  std::visit(
      [&](auto& m) {
        for (const auto& s : targets)
          out.results.push_back(attribution::occlusion_attribution(
              [&](const Eigen::MatrixXd& x) { return m.predict(x, s.subject_id); }, s, base,
              c.attribution.granularity, c.attribution.baseline, id));
      },
      model);
  out.top = attribution::aggregate_beeswarm(out.results, c.attribution.top_k);
  return out;
}

/// Writes attributions.csv, beeswarm.csv and top_features.json into `out`.
inline void write_attribution(const fs::path& out, const AttributionRun& run) {
  fs::create_directories(out);
  {
    std::ofstream f(out / "attributions.csv", std::ios::binary);
    attribution::write_csv(f, run.results);
  }
  {
    std::ofstream f(out / "beeswarm.csv", std::ios::binary);
    attribution::write_beeswarm_csv(f, run.top);
  }
  json top = json::array();
  for (const auto& r : run.top)
    top.push_back({{"rank", r.rank}, {"feature_id", r.feature_id}, {"mean_abs", r.mean_abs}, {"mean", r.mean}});
  write_json_file(out / "top_features.json", top);
}

/// Writes dataset CSVs for one seed into `out`.
inline void generate_data(const ExperimentConfig& c, std::uint64_t seed, const fs::path& out, bool force) {
  QTST_REQUIRE(c.data.synthetic, ErrorCode::kConfigError, "generate needs a 'synthetic' data block");
  prepare_output(out, force);
  dataio::write_csv(out, load_data(c, seed), c.data.write_format);
}

// ---------------------------------------------------------------------------
// Reports

/// Quantum vs matched classical baseline (same embed_dim, seq_len, input).
inline json parameter_report(const model::ModelConfig& q) {
  attention::AttentionConfig b;
  b.embed_dim = q.embed_dim;
  b.seq_len = q.seq_len;
  b.input_dim = q.input_dim;
  const auto nq = model::count_parameters(q);
  const auto nb = attention::count_parameters(b);
  json refs = json::array();
  for (const auto& r : kReferenceCounts) refs.push_back({{"model", r.name}, {"parameters", r.parameters}});
  return {{"quantum", nq},
          {"baseline", nb},
          {"ratio", static_cast<double>(nb) / static_cast<double>(nq)},
          {"baseline_config",
           {{"embed_dim", b.embed_dim},
            {"key_dim", b.key_dim},
            {"n_heads", b.n_heads},
            {"n_layers", b.n_layers},
            {"seq_len", b.seq_len},
            {"ffn_dim", b.ffn_dim}}},
          {"reference_counts", refs}};
}

struct Comparison {
  json report;
  std::string summary_csv;
  std::string runs_csv;
};

/// Trains every config (each into `<out>/<label>`) and tabulates mean +- std
/// per model.
inline Comparison compare(std::vector<ExperimentConfig> configs, const fs::path& out, bool force) {
  QTST_REQUIRE(configs.size() >= 2, ErrorCode::kConfigError, "compare needs at least two configs");
  prepare_output(out, force);
  std::map<std::string, int> used;
  Comparison cmp;
  json models = json::array();
  std::ostringstream summary, runs;
  summary << "model,parameter_count,metric,test_mean,test_std,test_formatted,gap_mean,gap_std,"
             "epochs_to_best_mean\n";
  runs << "model,seed,test_metric,test_loss,generalization_gap,best_epoch,epochs_run\n";
  auto num = [](const json& v) { return v.is_null() ? std::string() : dataio::detail::format_number(v.get<double>()); };
  for (auto& c : configs) {
    std::string label = c.label();
    if (used[label]++) label += "_" + std::to_string(used[label]);
    c.name = label;
    c.output_dir = out / label;
    const json m = run_training(c, true, "compare");
    models.push_back(m);
    const auto& s = m["summary"];
    const std::string metric = s["metric"];
    const json& tm = s["test_" + metric];
    const json& gap = s["generalization_gap"];
    const json& ep = s["epochs_to_best_val"];
    summary << label << ',' << m["parameter_count"].get<std::size_t>() << ',' << metric << ','
            << (tm.is_null() ? "" : num(tm["mean"])) << ',' << (tm.is_null() ? "" : num(tm["std"])) << ','
            << (tm.is_null() ? "" : tm["formatted"].get<std::string>()) << ','
            << (gap.is_null() ? "" : num(gap["mean"])) << ',' << (gap.is_null() ? "" : num(gap["std"]))
            << ',' << (ep.is_null() ? "" : num(ep["mean"])) << '\n';
    for (const auto& r : m["runs"]) {
      const json& test = r["test"];
      runs << label << ',' << r["seed"].get<std::uint64_t>() << ','
           << (test.is_null() ? "" : num(test[metric])) << ','
           << (test.is_null() ? "" : num(test["loss"])) << ',' << num(r["generalization_gap"]) << ','
           << r["best_epoch"].get<std::size_t>() << ',' << r["epochs_run"].get<std::size_t>() << '\n';
    }
  }
  json refs = json::array();
  for (const auto& r : kReferenceCounts) refs.push_back({{"model", r.name}, {"parameters", r.parameters}});
  cmp.report = {{"format", "qtst-comparison"}, {"version", kMetricsVersion}, {"models", models},
                {"reference_counts", refs}};
  cmp.summary_csv = summary.str();
  cmp.runs_csv = runs.str();
  write_json_file(out / "comparison.json", cmp.report);
  std::ofstream(out / "comparison.csv", std::ios::binary) << cmp.summary_csv;
  std::ofstream(out / "comparison_runs.csv", std::ios::binary) << cmp.runs_csv;
  write_json_file(out / "manifest.json", {{"command", "compare"}, {"metrics_version", kMetricsVersion}});
  return cmp;
}

}  // namespace qtst::experiment
