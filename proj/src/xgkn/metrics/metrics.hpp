#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xgkn/data/dataset.hpp"
#include "xgkn/explain/explainer.hpp"
#include "xgkn/ged/ged.hpp"
#include "xgkn/model/model.hpp"
#include "xgkn/num/stats.hpp"

namespace xgkn::metrics {

struct AimConfig {
  std::size_t samples_per_graph = 10;  // I1–I4
  std::size_t max_retries = 10;        // redraws per sample before it is skipped
  double inclusion = 0.5;              // I1/I2 node inclusion probability
  double delta_features = 0.1;         // I3
  double delta_remove = 0.1;           // I4
  double delta_add_scale = 0.1;        // I4: times the dataset's average density
  double delta_m1 = 0.5;
  double delta_m2 = 0.5;
  double edge_threshold = 0.5;         // filter binarization for A2
  double alpha = 0.05;
  bool a1_empty_as_zero = false;       // count empty-mask graphs as IoU 0 instead of skipping
  bool pool_train_only = false;        // feature pool from the training split only
  std::size_t jobs = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static AimConfig from_json(const nlohmann::json& j);
};

// One metric evaluation. `value` is oriented so that higher is better.
struct MetricValue {
  double value = 0.0;
  std::size_t evaluated = 0;  // graphs (or pairs) that contributed
  std::size_t skipped = 0;
  bool valid = true;          // false when more than half were skipped
};

// The model plus the frozen explainer settings used to explain any graph.
struct ExplainContext {
  const model::XgknModel* model = nullptr;
  std::vector<double> baseline;
  double threshold = 0.5;

  explain::Explanation explain(const Graph& g, std::uint64_t graph_id) const;
  int predict(const Graph& g) const { return model->predict(g); }
};

ExplainContext make_context(const model::XgknModel& model, const data::Dataset& ds,
                            const std::vector<std::size_t>& train_ids, double threshold, std::size_t jobs = 1);

std::vector<explain::Explanation> explain_all(const ExplainContext& ctx, const data::Dataset& ds,
                                              const std::vector<std::size_t>& ids, std::size_t jobs = 1);

// Values outside [0, 1] beyond rounding are an error; in-range values pass.
double checked_unit(double value, const char* metric);

MetricValue metric_a1(std::span<const explain::Explanation> explanations, const data::Dataset& ds,
                      bool empty_as_zero = false);

// 1 - mean over motifs of the best normalized GED to any binarized filter.
MetricValue metric_a2(const model::XgknModel& model, const data::Dataset& ds, const AimConfig& cfg);

enum class SamplingMode { kSufficiency, kNecessity };  // I1, I2
MetricValue metric_sufficiency_necessity(const ExplainContext& ctx, const data::Dataset& ds,
                                         std::span<const explain::Explanation> explanations, SamplingMode mode,
                                         const AimConfig& cfg, std::uint64_t seed);

enum class RobustnessMode { kNodes, kEdges };  // I3, I4
MetricValue metric_robustness(const ExplainContext& ctx, const data::Dataset& ds,
                              std::span<const explain::Explanation> explanations, RobustnessMode mode,
                              const num::Matrix& feature_pool, const AimConfig& cfg, std::uint64_t seed);

// Mean IoU of two explanation runs over the same graphs (I5).
MetricValue metric_consistency(std::span<const explain::Explanation> a, std::span<const explain::Explanation> b);

// 1 - mean IoU between explanations of the model and of a copy with perturbed
// filters (M1: features, M2: edges). The copy gets its own baseline.
MetricValue metric_correctness(const ExplainContext& ctx, const data::Dataset& ds,
                               std::span<const explain::Explanation> explanations,
                               const std::vector<std::size_t>& train_ids, model::PerturbMode mode,
                               const num::Matrix& feature_pool, const AimConfig& cfg, std::uint64_t seed);

// 1 - mean |Spearman| over concept pairs of the per-graph z streams (M3).
MetricValue metric_redundancy(const model::XgknModel& model, const data::Dataset& ds,
                              const std::vector<std::size_t>& ids, std::size_t jobs = 1);

// Criterion for threshold selection on the evaluation graphs.
enum class ThresholdCriterion { kA1, kSufficiencyPlusNecessity };
explain::ThresholdChoice select_threshold(const model::XgknModel& model, const data::Dataset& ds,
                                          const std::vector<std::size_t>& eval_ids,
                                          const std::vector<double>& baseline, ThresholdCriterion criterion,
                                          std::span<const double> grid, const AimConfig& cfg, std::uint64_t seed);

// ---- reports ---------------------------------------------------------------------

// Radar/report axis order.
const std::vector<std::string>& metric_names();
bool reported_as_complement(const std::string& metric);

struct RunMetrics {
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double threshold = 0.0;
  std::map<std::string, std::optional<MetricValue>> values;  // nullopt: not computable
};

struct MetricSummary {
  std::string name;
  bool available = false;
  double mean = 0.0;
  double std = 0.0;  // sample std (n - 1); 0 for a single run
  std::vector<double> per_run;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
  bool valid = true;
  bool complement = false;  // reported as 1 - γ
};

struct Comparison {
  std::string metric;
  std::optional<num::TTestResult> test;  // nullopt when the test is undefined
  std::string note;
};

struct AimReport {
  std::string label;
  std::vector<std::uint64_t> seeds;
  MetricSummary accuracy;
  std::vector<MetricSummary> metrics;
  std::vector<double> thresholds;
  nlohmann::json config;
  std::vector<std::string> notes;
  std::vector<Comparison> comparisons;
};

AimReport aim_report(const std::string& label, std::span<const RunMetrics> runs, const nlohmann::json& config);
std::vector<Comparison> compare(const AimReport& a, const AimReport& b, double alpha = 0.05);

nlohmann::json report_to_json(const AimReport& r);
AimReport report_from_json(const nlohmann::json& j);
std::string report_csv(const AimReport& r);
std::string radar_csv(const AimReport& r);
std::string comparisons_csv(const AimReport& r);

}  // namespace xgkn::metrics
