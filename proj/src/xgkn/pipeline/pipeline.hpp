#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "xgkn/data/dataset.hpp"
#include "xgkn/explain/explainer.hpp"
#include "xgkn/metrics/metrics.hpp"
#include "xgkn/model/model.hpp"

namespace xgkn::pipeline {

struct DatasetSpec {
  std::string source = "ba2motifs";  // ba2motifs | bamultishapes | tu
  std::size_t n_graphs = 1000;       // generators only
  std::uint64_t seed = 0;            // generator seed
  std::filesystem::path path;        // tu: directory holding <tu_name>_*.txt
  std::string tu_name;
  std::filesystem::path gt_sidecar;  // optional instance masks
  std::string feature_policy = "constant";
  std::size_t degree_cap = 0;        // one-hot-degree; 0 = max degree observed
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;
};

struct ExplainSpec {
  std::vector<double> grid = explain::default_threshold_grid();
  std::string criterion = "auto";  // auto | a1 | i1+i2
  double sensitivity = 0.1;        // criterion also logged at p -/+ this
};

// Everything that determines results. `output` and `jobs` do not enter the
// config hash.
struct RunConfig {
  DatasetSpec dataset;
  model::ModelConfig model;  // input_dim and num_classes come from the dataset
  model::TrainConfig train;
  metrics::AimConfig aim;
  ExplainSpec explain;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::filesystem::path output;
  std::size_t jobs = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  // 16 hex digits of FNV-1a 64 over the canonical JSON minus output/jobs.
  std::string hash() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

using Log = std::function<void(const std::string&)>;

struct Prepared {
  data::Dataset ds;
  std::vector<data::Split> splits;  // splits[i] belongs to seeds[i]
  std::string config_hash;
};

// Builds the dataset described by the spec (generation or TU parsing, masks,
// feature policy) without touching the output directory.
data::Dataset build_dataset(const DatasetSpec& spec);

// Writes <out>/dataset/ (TU layout, masks, motifs) and <out>/manifest.json.
Prepared cmd_prepare(const RunConfig& cfg, const Log& log = {});
// Reads the prepared artifacts back; refuses a manifest of another config.
Prepared load_prepared(const RunConfig& cfg);

struct SeedTraining {
  std::uint64_t seed = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  model::TrainHistory history;
};

// Per seed: <out>/seed_<s>/checkpoint.json, history.csv, train.json.
std::vector<SeedTraining> cmd_train(const RunConfig& cfg, const Log& log = {});

struct SeedExplanation {
  std::uint64_t seed = 0;
  std::string criterion;
  explain::ThresholdChoice choice;
  // Criterion at p - sensitivity and p + sensitivity, when inside [0, 1].
  std::optional<double> score_below, score_above;
  double seconds_per_graph = 0.0;
};

// Per seed: explanations.jsonl for every graph plus threshold.json; the wall
// time goes to the timing.json sidecar.
std::vector<SeedExplanation> cmd_explain(const RunConfig& cfg, const Log& log = {});

// Writes report.json, report.csv and radar.csv (plus comparisons.csv when
// another run's report is given).
metrics::AimReport cmd_evaluate(const RunConfig& cfg, const std::optional<std::filesystem::path>& compare_with = {},
                                const Log& log = {});

// prepare + train + explain + evaluate.
metrics::AimReport run_all(const RunConfig& cfg, const Log& log = {});

std::filesystem::path seed_dir(const RunConfig& cfg, std::uint64_t seed);

}  // namespace xgkn::pipeline
