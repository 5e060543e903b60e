#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "xgkn/data/dataset.hpp"
#include "xgkn/graph.hpp"
#include "xgkn/model/model.hpp"

namespace xgkn::explain {

// Largest concept count the exact enumeration accepts (2^m coalitions).
inline constexpr std::size_t kMaxExactConcepts = 20;

struct Attribution {
  double phi0 = 0.0;         // v(∅): target logit at the baseline
  std::vector<double> phi;   // one per concept
  double target = 0.0;       // target logit at z
  int cls = 0;
};

using Predictor = std::function<std::vector<double>(std::span<const double>)>;

// Exact Shapley values of v(T) = f(z with coordinates outside T set to the
// baseline)[cls], by full subset enumeration.
Attribution exact_shapley(const Predictor& f, std::span<const double> z, std::span<const double> baseline, int cls);
Attribution exact_shapley(const model::XgknModel& model, std::span<const double> z,
                          std::span<const double> baseline, int cls);

struct Propagation {
  std::vector<double> w;              // per node
  std::vector<std::size_t> inactive;  // concepts skipped for |z_i| <= eps
};

// Moves concept attributions onto nodes. Additive modes: w_j = Σ_i φ_i S̃_ji / z_i;
// max mode: φ_i goes to the winning row of concept i.
Propagation propagate_to_nodes(const Attribution& attr, const model::ForwardTrace& trace, model::AggMode mode,
                               double eps = 1e-8);

// Mean z over the listed graphs (the Shapley baseline).
std::vector<double> baseline_z(const model::XgknModel& model, const data::Dataset& ds,
                               const std::vector<std::size_t>& ids, std::size_t jobs = 1);

struct NodeImportance {
  std::vector<double> importance;  // softmax(ψ)
  std::vector<double> psi;
  Attribution attribution;
  Propagation propagation;
  int predicted = 0;
};

NodeImportance node_importance(const model::XgknModel& model, const Graph& g, std::span<const double> baseline);

struct Explanation {
  std::uint64_t graph_id = 0;
  std::vector<double> importance;
  NodeSet selected;  // original node ids
  double threshold = 0.0;
  Graph subgraph;
};

// Drops the largest low-importance prefix whose mass is <= p and keeps the
// rest; nodes tied with the lowest kept value are kept too, and at least the
// top node always is.
Explanation threshold_explanation(const Graph& g, std::span<const double> importance, double p,
                                  std::uint64_t graph_id = NodeSet::kUntagged);

// One line per explanation, fields graph / importance / selected / threshold.
std::string explanation_jsonl(const Explanation& e);
struct ExplanationRecord {
  std::uint64_t graph_id = 0;
  std::vector<double> importance;
  std::vector<NodeId> selected;
  double threshold = 0.0;
};
// Lines holding only a "meta" object are skipped.
std::vector<ExplanationRecord> parse_explanations_jsonl(const std::string& text);

// Threshold grid search: argmax of score(p), ties to the smallest p.
struct ThresholdChoice {
  double p = 0.0;
  double score = 0.0;
  std::vector<std::pair<double, double>> scores;  // (p, score) over the grid
};
ThresholdChoice select_threshold(std::span<const double> grid, const std::function<double(double)>& score);

std::vector<double> default_threshold_grid();

}  // namespace xgkn::explain
