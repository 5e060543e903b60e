#include "xgkn/explain/explainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "xgkn/error.hpp"
#include "xgkn/num/stats.hpp"
#include "xgkn/parallel.hpp"

namespace xgkn::explain {

Attribution exact_shapley(const Predictor& f, std::span<const double> z, std::span<const double> baseline, int cls) {
  const std::size_t m = z.size();
  require(m >= 1, ErrorCode::kInvalidArgument, "exact_shapley: no concepts");
  require(baseline.size() == m, ErrorCode::kShape, "exact_shapley: baseline length mismatch");
  require(m <= kMaxExactConcepts, ErrorCode::kCapacity,
          "exact_shapley: " + std::to_string(m) + " concepts exceed the exact limit of " +
              std::to_string(kMaxExactConcepts) + "; a sampling estimator would be needed");
  const std::size_t n_sets = std::size_t{1} << m;
  std::vector<double> v(n_sets);
  std::vector<double> x(m);
  for (std::size_t mask = 0; mask < n_sets; ++mask) {
    for (std::size_t i = 0; i < m; ++i) x[i] = (mask >> i) & 1 ? z[i] : baseline[i];
    const auto out = f(x);
    require(cls >= 0 && static_cast<std::size_t>(cls) < out.size(), ErrorCode::kInvalidArgument,
            "exact_shapley: class index out of range");
    v[mask] = out[static_cast<std::size_t>(cls)];
  }
  // weight[s] = s! (m-s-1)! / m!
  std::vector<double> weight(m);
  for (std::size_t s = 0; s < m; ++s)
    weight[s] = std::exp(std::lgamma(double(s) + 1) + std::lgamma(double(m - s)) - std::lgamma(double(m) + 1));
  Attribution a;
  a.cls = cls;
  a.phi0 = v[0];
  a.target = v[n_sets - 1];
  a.phi.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    double s = 0.0;
    for (std::size_t mask = 0; mask < n_sets; ++mask) {
      if (mask & bit) continue;
      s += weight[static_cast<std::size_t>(std::popcount(mask))] * (v[mask | bit] - v[mask]);
    }
    a.phi[i] = s;
  }
  return a;
}

Attribution exact_shapley(const model::XgknModel& model, std::span<const double> z,
                          std::span<const double> baseline, int cls) {
  return exact_shapley([&model](std::span<const double> x) { return model.f_pred(x); }, z, baseline, cls);
}

Propagation propagate_to_nodes(const Attribution& attr, const model::ForwardTrace& trace, model::AggMode mode,
                               double eps) {
  const std::size_t n = trace.contributions.rows();
  const std::size_t m = trace.contributions.cols();
  require(attr.phi.size() == m && trace.z.size() == m, ErrorCode::kTrace,
          "propagate_to_nodes: attribution and trace disagree on the concept count");
  Propagation out;
  out.w.assign(n, 0.0);
  if (mode == model::AggMode::kMax) {
    require(trace.argmax.size() == m, ErrorCode::kTrace, "propagate_to_nodes: trace lacks max-mode winners");
    for (std::size_t i = 0; i < m; ++i) {
      require(trace.argmax[i] < n, ErrorCode::kTrace, "propagate_to_nodes: winner row out of range");
      out.w[trace.argmax[i]] += attr.phi[i];
    }
    return out;
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double zi = trace.z[i];
    if (std::abs(zi) <= eps) {
      out.inactive.push_back(i);
      continue;
    }
    const double f = attr.phi[i] / zi;
    for (std::size_t j = 0; j < n; ++j) out.w[j] += f * trace.contributions(j, i);
  }
  return out;
}

std::vector<double> baseline_z(const model::XgknModel& model, const data::Dataset& ds,
                               const std::vector<std::size_t>& ids, std::size_t jobs) {
  require(!ids.empty(), ErrorCode::kInvalidArgument, "baseline_z: no graphs");
  const auto& cfg = model.config();
  std::vector<std::vector<double>> zs(ids.size());
  parallel_for(ids.size(), jobs, [&](std::size_t b) {
    zs[b] = model::f_agg(model.f_sim(ds.graphs.at(ids[b])).R, cfg.agg, cfg.eps, cfg.norm).z;
  });
  std::vector<double> mean(cfg.num_filters, 0.0);
  for (const auto& z : zs)
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += z[i];
  for (double& x : mean) x /= static_cast<double>(ids.size());
  return mean;
}

NodeImportance node_importance(const model::XgknModel& model, const Graph& g, std::span<const double> baseline) {
  const model::ForwardTrace trace = model.forward(g);
  NodeImportance out;
  out.predicted = trace.predicted;
  out.attribution = exact_shapley(model, trace.z, baseline, trace.predicted);
  out.propagation = propagate_to_nodes(out.attribution, trace, model.config().agg, model.config().eps);
  out.psi = out.propagation.w;
  out.importance = num::softmax(out.psi);
  return out;
}

Explanation threshold_explanation(const Graph& g, std::span<const double> importance, double p,
                                  std::uint64_t graph_id) {
  const std::size_t n = g.size();
  require(importance.size() == n, ErrorCode::kShape, "threshold_explanation: importance length mismatch");
  require(n >= 1, ErrorCode::kEmptySelection, "threshold_explanation: empty graph");
  require(p >= 0.0 && p <= 1.0, ErrorCode::kInvalidArgument, "threshold_explanation: p must lie in [0, 1]");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return importance[a] < importance[b]; });
  // Mass tolerance keeps e.g. 5 × 0.1 <= 0.5 despite rounding.
  constexpr double kTol = 1e-12;
  double cum = 0.0;
  std::size_t k = 0;
  while (k < n && cum + importance[order[k]] <= p + kTol) cum += importance[order[k++]];
  if (k == n) k = n - 1;
  const double boundary = importance[order[k]];
  std::vector<NodeId> ids;
  for (std::size_t r = 0; r < n; ++r)
    if (r >= k || importance[order[r]] == boundary) ids.push_back(g.node_ids()[order[r]]);
  Explanation e;
  e.graph_id = graph_id;
  e.importance.assign(importance.begin(), importance.end());
  e.selected = NodeSet(std::move(ids), graph_id);
  e.threshold = p;
  e.subgraph = induced_subgraph(g, NodeSet(e.selected.ids()));
  return e;
}

std::string explanation_jsonl(const Explanation& e) {
  nlohmann::json j{{"graph", e.graph_id},
                   {"importance", e.importance},
                   {"selected", e.selected.ids()},
                   {"threshold", e.threshold}};
  return j.dump();
}

std::vector<ExplanationRecord> parse_explanations_jsonl(const std::string& text) {
  std::vector<ExplanationRecord> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.contains("meta") && !j.contains("graph")) continue;
      ExplanationRecord r;
      r.graph_id = j.at("graph").get<std::uint64_t>();
      r.importance = j.at("importance").get<std::vector<double>>();
      r.selected = j.at("selected").get<std::vector<NodeId>>();
      r.threshold = j.at("threshold").get<double>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& ex) {
      fail(ErrorCode::kFormat, "explanations line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

ThresholdChoice select_threshold(std::span<const double> grid, const std::function<double(double)>& score) {
  require(!grid.empty(), ErrorCode::kInvalidArgument, "select_threshold: empty grid");
  std::vector<double> sorted(grid.begin(), grid.end());
  std::sort(sorted.begin(), sorted.end());
  ThresholdChoice c;
  for (double p : sorted) {
    const double s = score(p);
    c.scores.emplace_back(p, s);
    if (c.scores.size() == 1 || s > c.score) {
      c.p = p;
      c.score = s;
    }
  }
  return c;
}

std::vector<double> default_threshold_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 9; ++i) g.push_back(i / 10.0);
  return g;
}

}  // namespace xgkn::explain
