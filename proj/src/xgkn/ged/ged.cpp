#include "xgkn/ged/ged.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xgkn/error.hpp"

namespace xgkn::ged {

void EditCosts::validate() const {
  require(node_insert >= 0 && node_delete >= 0 && node_substitute >= 0 && edge_insert >= 0 && edge_delete >= 0,
          ErrorCode::kInvalidArgument, "edit costs must be nonnegative");
  require(feature_tol >= 0, ErrorCode::kInvalidArgument, "feature tolerance must be nonnegative");
}

namespace {

bool rows_equal(std::span<const double> a, std::span<const double> b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > tol) return false;
  return true;
}

class Search {
 public:
  Search(const Graph& g1, const Graph& g2, const EditCosts& c) : c_(c), n1_(g1.size()), n2_(g2.size()) {
    e1_.assign(n1_ * n1_, false);
    e2_.assign(n2_ * n2_, false);
    for (std::size_t i = 0; i < n1_; ++i)
      for (std::size_t j = 0; j < n1_; ++j) e1_[i * n1_ + j] = i != j && g1.has_edge(i, j);
    for (std::size_t i = 0; i < n2_; ++i)
      for (std::size_t j = 0; j < n2_; ++j) e2_[i * n2_ + j] = i != j && g2.has_edge(i, j);

    // Shared label ids: rows equal within tolerance share a label.
    std::vector<std::span<const double>> reps;
    auto label_of = [&](std::span<const double> row) {
      for (std::size_t l = 0; l < reps.size(); ++l)
        if (rows_equal(reps[l], row, c_.feature_tol)) return l;
      reps.push_back(row);
      return reps.size() - 1;
    };
    for (std::size_t i = 0; i < n1_; ++i) l1_.push_back(label_of(g1.features().row_span(i)));
    for (std::size_t j = 0; j < n2_; ++j) l2_.push_back(label_of(g2.features().row_span(j)));
    n_labels_ = reps.size();

    // High-degree nodes first tighten the bound early.
    order_.resize(n1_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(),
                     [&](std::size_t a, std::size_t b) { return g1.degree(a) > g1.degree(b); });

    c_node_ = std::min({c_.node_insert, c_.node_delete, c_.node_substitute});
    c_edge_ = std::min(c_.edge_insert, c_.edge_delete);
    map_.assign(n1_, kNone);
    used_.assign(n2_, false);
    best_ = static_cast<double>(n1_) * c_.node_delete + static_cast<double>(g1.edge_count()) * c_.edge_delete +
            static_cast<double>(n2_) * c_.node_insert + static_cast<double>(g2.edge_count()) * c_.edge_insert;
  }

  double run() {
    dfs(0, 0.0);
    return best_;
  }

 private:
  static constexpr std::size_t kNone = ~std::size_t{0};

  bool edge1(std::size_t i, std::size_t j) const { return e1_[i * n1_ + j]; }
  bool edge2(std::size_t i, std::size_t j) const { return e2_[i * n2_ + j]; }

  // Admissible bound on the cost still to pay once order_[0..depth) is fixed.
  double lower_bound(std::size_t depth) const {
    std::vector<int> count(n_labels_, 0);
    std::size_t r1 = 0, u2 = 0;
    for (std::size_t d = depth; d < n1_; ++d) {
      ++count[l1_[order_[d]]];
      ++r1;
    }
    std::size_t common = 0;
    for (std::size_t j = 0; j < n2_; ++j) {
      if (used_[j]) continue;
      ++u2;
      if (count[l2_[j]] > 0) {
        --count[l2_[j]];
        ++common;
      }
    }
    const double node = c_node_ * static_cast<double>(std::max(r1, u2) - common);
    // Edges touching a remaining g1 node can only pair with edges touching an
    // unused g2 node.
    std::vector<bool> remaining(n1_, false);
    for (std::size_t d = depth; d < n1_; ++d) remaining[order_[d]] = true;
    std::size_t er1 = 0, er2 = 0;
    for (std::size_t i = 0; i < n1_; ++i)
      for (std::size_t j = i + 1; j < n1_; ++j)
        if (edge1(i, j) && (remaining[i] || remaining[j])) ++er1;
    for (std::size_t i = 0; i < n2_; ++i)
      for (std::size_t j = i + 1; j < n2_; ++j)
        if (edge2(i, j) && (!used_[i] || !used_[j])) ++er2;
    const double edge = c_edge_ * static_cast<double>(er1 > er2 ? er1 - er2 : er2 - er1);
    return node + edge;
  }

  // Cost of inserting every unused g2 node and every g2 edge touching one.
  double completion() const {
    double cost = 0.0;
    for (std::size_t j = 0; j < n2_; ++j)
      if (!used_[j]) cost += c_.node_insert;
    for (std::size_t i = 0; i < n2_; ++i)
      for (std::size_t j = i + 1; j < n2_; ++j)
        if (edge2(i, j) && (!used_[i] || !used_[j])) cost += c_.edge_insert;
    return cost;
  }

  // Incremental cost of mapping u (g1) to t (g2 node or kNone = delete).
  double step_cost(std::size_t depth, std::size_t u, std::size_t t) const {
    double cost = t == kNone ? c_.node_delete : (l1_[u] == l2_[t] ? 0.0 : c_.node_substitute);
    for (std::size_t d = 0; d < depth; ++d) {
      const std::size_t w = order_[d];
      const std::size_t tw = map_[w];
      const bool a = edge1(u, w);
      const bool b = t != kNone && tw != kNone && edge2(t, tw);
      if (a && !b) cost += c_.edge_delete;
      if (!a && b) cost += c_.edge_insert;
    }
    return cost;
  }

  void dfs(std::size_t depth, double cost) {
    if (depth == n1_) {
      best_ = std::min(best_, cost + completion());
      return;
    }
    if (cost + lower_bound(depth) >= best_) return;
    const std::size_t u = order_[depth];
    for (std::size_t t = 0; t <= n2_; ++t) {
      const std::size_t target = t == n2_ ? kNone : t;
      if (target != kNone && used_[target]) continue;
      const double c = cost + step_cost(depth, u, target);
      if (c >= best_) continue;
      map_[u] = target;
      if (target != kNone) used_[target] = true;
      dfs(depth + 1, c);
      if (target != kNone) used_[target] = false;
      map_[u] = kNone;
    }
  }

  const EditCosts& c_;
  std::size_t n1_, n2_;
  std::vector<bool> e1_, e2_;
  std::vector<std::size_t> l1_, l2_;
  std::size_t n_labels_ = 0;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> map_;
  std::vector<bool> used_;
  double c_node_ = 1.0, c_edge_ = 1.0;
  double best_ = 0.0;
};

}  // namespace

double ged_exact(const Graph& g1, const Graph& g2, const EditCosts& costs) {
  costs.validate();
  require(g1.size() <= kMaxNodes && g2.size() <= kMaxNodes, ErrorCode::kCapacity,
          "ged_exact: graphs of " + std::to_string(g1.size()) + " and " + std::to_string(g2.size()) +
              " nodes exceed the exact-search cap of " + std::to_string(kMaxNodes));
  require(g1.empty() || g2.empty() || g1.feature_dim() == g2.feature_dim(), ErrorCode::kFeatureDim,
          "ged_exact: feature dimensions differ");
  return Search(g1, g2, costs).run();
}

double ged_normalized(const Graph& g1, const Graph& g2, const EditCosts& costs) {
  const double worst = static_cast<double>(g1.size()) * costs.node_delete +
                       static_cast<double>(g1.edge_count()) * costs.edge_delete +
                       static_cast<double>(g2.size()) * costs.node_insert +
                       static_cast<double>(g2.edge_count()) * costs.edge_insert;
  const double d = ged_exact(g1, g2, costs);
  if (worst == 0.0) return 0.0;
  return std::clamp(d / worst, 0.0, 1.0);
}

FeatureQuantizer FeatureQuantizer::unlabeled() { return {}; }

FeatureQuantizer FeatureQuantizer::from_dataset(const data::Dataset& ds, const kernel::Encoder& encoder) {
  const num::Matrix pool = ds.feature_pool();
  std::vector<std::vector<double>> distinct;
  for (std::size_t r = 0; r < pool.rows(); ++r) {
    const auto row = pool.row_span(r);
    const bool seen = std::any_of(distinct.begin(), distinct.end(),
                                  [&](const std::vector<double>& d) { return rows_equal(d, row, 0.0); });
    if (!seen) distinct.emplace_back(row.begin(), row.end());
  }
  FeatureQuantizer q;
  if (distinct.size() <= 1) return q;
  std::sort(distinct.begin(), distinct.end());
  q.raw_ = num::Matrix(distinct.size(), pool.cols());
  for (std::size_t r = 0; r < distinct.size(); ++r)
    for (std::size_t c = 0; c < pool.cols(); ++c) q.raw_(r, c) = distinct[r][c];
  q.embedded_ = encoder.embed(q.raw_);
  return q;
}

num::Matrix FeatureQuantizer::quantize(const num::Matrix& filter_features) const {
  const std::size_t n = filter_features.rows();
  if (is_unlabeled()) return num::Matrix(n, 1, 1.0);
  require(filter_features.cols() == embedded_.cols(), ErrorCode::kFeatureDim,
          "quantize: filter features do not match the encoder width");
  num::Matrix out(n, raw_.cols());
  for (std::size_t v = 0; v < n; ++v) {
    const auto f = filter_features.row_span(v);
    double fn = 0.0;
    for (double x : f) fn += x * x;
    fn = std::sqrt(fn);
    std::size_t best = 0;
    double best_cos = -2.0;
    for (std::size_t r = 0; r < embedded_.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < f.size(); ++c) dot += f[c] * embedded_(r, c);
      const double cos = fn > 0.0 ? dot / fn : 0.0;
      if (cos > best_cos) {
        best_cos = cos;
        best = r;
      }
    }
    for (std::size_t c = 0; c < raw_.cols(); ++c) out(v, c) = raw_(best, c);
  }
  return out;
}

Graph binarize_filter(const kernel::GraphFilter& filter, double edge_threshold, const FeatureQuantizer& quantizer) {
  require(edge_threshold > 0.0 && edge_threshold < 1.0, ErrorCode::kInvalidArgument,
          "binarize_filter: threshold must lie in (0, 1)");
  const num::Matrix a = filter.adjacency();
  const std::size_t n = a.rows();
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (a(i, j) >= edge_threshold) edges.emplace_back(i, j);
  return Graph::from_edges(n, edges, quantizer.quantize(filter.features.value));
}

}  // namespace xgkn::ged
