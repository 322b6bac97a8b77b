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
// Command-line front end for data generation, training, evaluation,
// attribution, model comparison and parameter reports.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qtst/experiment.hpp"

namespace {

namespace ex = qtst::experiment;
namespace fs = std::filesystem;

constexpr int kUsageError = 2;

struct Options {
  std::vector<std::string> configs;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;
  std::string checkpoint;
  std::string resume;
  std::size_t epochs = 0;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ex::ExperimentConfig config_of(const Options& o) {
  if (o.configs.empty()) throw UsageError("--config is required");
  if (o.configs.size() > 1) throw UsageError("this command takes a single --config");
  auto c = ex::load_config(o.configs.front());
  if (o.seed) c.seeds = {*o.seed};
  if (!o.out.empty()) c.output_dir = o.out;
  return c;
}

/// Checkpoint named by --checkpoint, or <output_dir>/seed_<s>/checkpoint.json
/// of --config (first seed unless --seed is given).
fs::path checkpoint_of(const Options& o) {
  if (!o.checkpoint.empty()) return o.checkpoint;
  if (o.configs.empty()) throw UsageError("pass --checkpoint or --config");
  const auto c = ex::load_config(o.configs.front());
  return ex::seed_dir(c.output_dir, o.seed.value_or(c.seeds.front())) / "checkpoint.json";
}

void print_summary(const ex::json& m) {
  const auto& s = m["summary"];
  const std::string metric = s["metric"];
  std::cout << m["name"].get<std::string>() << " (" << m["parameter_count"] << " parameters): test "
            << metric << ' '
            << (s["test_" + metric].is_null() ? std::string("n/a") : s["test_" + metric]["formatted"].get<std::string>())
            << '\n';
}

int cmd_generate(const Options& o) {
  auto c = config_of(o);
  const fs::path out = o.out.empty() ? c.output_dir / "data" : fs::path(o.out);
  const auto seed = o.seed.value_or(c.seeds.front());
  ex::generate_data(c, seed, out, o.force);
  std::cout << "wrote " << c.data.spec.n_subjects << " subjects to " << out.string() << '\n';
  return 0;
}

int cmd_train(const Options& o) {
  if (!o.resume.empty()) {
    if (o.out.empty()) throw UsageError("--resume needs --out");
    if (o.epochs == 0) throw UsageError("--resume needs --epochs");
    print_summary(ex::resume_training(o.resume, o.epochs, o.out, o.force));
    return 0;
  }
  auto c = config_of(o);
  if (o.epochs > 0) c.training.epochs = o.epochs;
  print_summary(ex::run_training(c, o.force));
  std::cout << "results in " << c.output_dir.string() << '\n';
  return 0;
}

int cmd_evaluate(const Options& o) {
  const auto m = ex::evaluate_checkpoint(checkpoint_of(o));
  if (o.out.empty()) {
    std::cout << m.dump(2) << '\n';
    return 0;
  }
  const fs::path file = fs::path(o.out) / "evaluation.json";
  if (fs::exists(file) && !o.force)
    throw qtst::Error(qtst::ErrorCode::kConfigError, file.string() + " exists; pass --force to overwrite");
  fs::create_directories(o.out);
  ex::write_json_file(file, m);
  print_summary(m);
  return 0;
}

int cmd_attribute(const Options& o) {
  const auto ck = checkpoint_of(o);
  const fs::path out = o.out.empty() ? ck.parent_path() / "attribution" : fs::path(o.out);
  if (fs::exists(out / "attributions.csv") && !o.force)
    throw qtst::Error(qtst::ErrorCode::kConfigError, out.string() + " holds attributions; pass --force to overwrite");
  const auto run = ex::attribute_checkpoint(ck);
  ex::write_attribution(out, run);
  for (const auto& r : run.top)
    std::cout << r.rank << ' ' << r.feature_id << ' ' << qtst::dataio::detail::format_number(r.mean_abs) << '\n';
  return 0;
}

int cmd_compare(const Options& o) {
  if (o.configs.size() < 2) throw UsageError("compare needs at least two --config files");
  if (o.out.empty()) throw UsageError("compare needs --out");
  std::vector<ex::ExperimentConfig> configs;
  for (const auto& p : o.configs) {
    auto c = ex::load_config(p);
    if (o.seed) c.seeds = {*o.seed};
    configs.push_back(std::move(c));
  }
  const auto cmp = ex::compare(std::move(configs), o.out, o.force);
  std::cout << cmp.summary_csv;
  return 0;
}

int cmd_params(const Options& o) {
  qtst::model::ModelConfig q;
  if (!o.configs.empty()) {
    const auto c = ex::load_config(o.configs.front());
    q = c.quantum;
  }
  const auto report = ex::parameter_report(q);
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    const fs::path file = fs::path(o.out) / "params.json";
    if (fs::exists(file) && !o.force)
      throw qtst::Error(qtst::ErrorCode::kConfigError, file.string() + " exists; pass --force to overwrite");
    ex::write_json_file(file, report);
  }
  std::cout << report.dump(2) << '\n';
  return 0;
}

bool valid_thread_env() {
  const char* env = std::getenv("QTST_THREADS");
  if (!env) return true;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  return end != env && *end == '\0' && v > 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum time-series transformer experiments"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, bool many_configs = false) {
    auto* opt = sub->add_option("--config", o.configs, "experiment config (JSON)");
    if (!many_configs) opt->expected(1);
    sub->add_option("--seed", o.seed, "run only this seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_flag("--force", o.force, "overwrite existing results");
  };

  auto* generate = app.add_subcommand("generate", "write a synthetic dataset as CSV");
  add_common(generate);
  auto* train = app.add_subcommand("train", "train every seed of a config");
  add_common(train);
  train->add_option("--resume", o.resume, "continue from this checkpoint");
  train->add_option("--epochs", o.epochs, "epochs to train (overrides the config)");
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on its splits");
  add_common(evaluate);
  evaluate->add_option("--checkpoint", o.checkpoint, "checkpoint file");
  auto* attribute = app.add_subcommand("attribute", "occlusion attributions on the test split");
  add_common(attribute);
  attribute->add_option("--checkpoint", o.checkpoint, "checkpoint file");
  auto* compare = app.add_subcommand("compare", "train and tabulate several configs");
  add_common(compare, true);
  auto* params = app.add_subcommand("params", "parameter counts versus the attention baseline");
  add_common(params);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kUsageError;
  }
  if (!valid_thread_env()) {
    std::cerr << "error: QTST_THREADS must be a positive integer\n";
    return kUsageError;
  }

  try {
    if (*generate) return cmd_generate(o);
    if (*train) return cmd_train(o);
    if (*evaluate) return cmd_evaluate(o);
    if (*attribute) return cmd_attribute(o);
    if (*compare) return cmd_compare(o);
    return cmd_params(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const qtst::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == qtst::ErrorCode::kConfigError ? kUsageError : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
