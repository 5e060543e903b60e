#include "xgkn/graph.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <numeric>
#include <string>

#include "xgkn/error.hpp"

namespace xgkn {

Graph::Graph(num::Matrix adjacency, num::Matrix features, std::vector<NodeId> node_ids,
             std::optional<int> label, std::optional<std::size_t> anchor)
    : adjacency_(std::move(adjacency)),
      features_(std::move(features)),
      node_ids_(std::move(node_ids)),
      label_(label),
      anchor_(anchor) {
  const std::size_t n = adjacency_.rows();
  require(adjacency_.cols() == n, ErrorCode::kShape, "Graph: adjacency must be square");
  require(features_.rows() == n, ErrorCode::kFeatureDim,
          "Graph: feature rows (" + std::to_string(features_.rows()) + ") != node count (" +
              std::to_string(n) + ")");
  for (std::size_t i = 0; i < n; ++i) {
    require(adjacency_(i, i) == 0.0, ErrorCode::kInvalidArgument,
            "Graph: adjacency diagonal must be zero");
    for (std::size_t j = i + 1; j < n; ++j) {
      require(adjacency_(i, j) == adjacency_(j, i), ErrorCode::kInvalidArgument,
              "Graph: adjacency must be symmetric");
      require(adjacency_(i, j) >= 0.0, ErrorCode::kInvalidArgument,
              "Graph: adjacency must be nonnegative");
    }
  }
  if (node_ids_.empty()) {
    node_ids_.resize(n);
    std::iota(node_ids_.begin(), node_ids_.end(), NodeId{0});
  }
  require(node_ids_.size() == n, ErrorCode::kShape, "Graph: node_ids size != node count");
  std::vector<NodeId> sorted = node_ids_;
  std::sort(sorted.begin(), sorted.end());
  require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
          ErrorCode::kInvalidArgument, "Graph: node_ids must be distinct");
  if (anchor_) require(*anchor_ < n, ErrorCode::kAnchor, "Graph: anchor out of range");
}

Graph Graph::from_edges(std::size_t n, std::span<const Edge> edges, num::Matrix features,
                        std::optional<int> label) {
  num::Matrix adj(n, n);
  for (auto [a, b] : edges) {
    require(a < n && b < n, ErrorCode::kInvalidNode, "Graph::from_edges: endpoint out of range");
    require(a != b, ErrorCode::kInvalidArgument, "Graph::from_edges: self-loop");
    adj(a, b) = 1.0;
    adj(b, a) = 1.0;
  }
  return Graph(std::move(adj), std::move(features), {}, label);
}

Graph Graph::from_edges(std::size_t n, std::span<const Edge> edges, std::optional<int> label) {
  return from_edges(n, edges, num::Matrix(n, 1, 1.0), label);
}

std::size_t Graph::degree(std::size_t i) const {
  std::size_t d = 0;
  for (std::size_t j = 0; j < size(); ++j) d += has_edge(i, j) ? 1 : 0;
  return d;
}

std::size_t Graph::edge_count() const {
  std::size_t e = 0;
  for (std::size_t i = 0; i < size(); ++i)
    for (std::size_t j = i + 1; j < size(); ++j) e += has_edge(i, j) ? 1 : 0;
  return e;
}

std::vector<Edge> Graph::edges() const {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < size(); ++i)
    for (std::size_t j = i + 1; j < size(); ++j)
      if (has_edge(i, j)) out.emplace_back(i, j);
  return out;
}

std::vector<std::size_t> Graph::neighbors(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < size(); ++j)
    if (has_edge(i, j)) out.push_back(j);
  return out;
}

std::optional<std::size_t> Graph::index_of(NodeId id) const {
  // Root graphs use the identity map; check it before scanning.
  if (id < node_ids_.size() && node_ids_[id] == id) return id;
  auto it = std::find(node_ids_.begin(), node_ids_.end(), id);
  if (it == node_ids_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - node_ids_.begin());
}

double Graph::density() const {
  const std::size_t n = size();
  if (n < 2) return 0.0;
  return 2.0 * static_cast<double>(edge_count()) / static_cast<double>(n * (n - 1));
}

Graph Graph::with_label(std::optional<int> label) const {
  Graph g = *this;
  g.label_ = label;
  return g;
}

Graph Graph::with_features(num::Matrix features) const {
  return Graph(adjacency_, std::move(features), node_ids_, label_, anchor_);
}

Graph Graph::with_adjacency(num::Matrix adjacency) const {
  return Graph(std::move(adjacency), features_, node_ids_, label_, anchor_);
}

NodeSet::NodeSet(std::vector<NodeId> ids, std::uint64_t root) : ids_(std::move(ids)), root_(root) {
  std::sort(ids_.begin(), ids_.end());
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
}

bool NodeSet::contains(NodeId id) const {
  return std::binary_search(ids_.begin(), ids_.end(), id);
}

namespace {

Graph restrict(const Graph& g, const std::vector<std::size_t>& positions,
               std::optional<std::size_t> anchor) {
  const std::size_t k = positions.size();
  num::Matrix adj(k, k);
  num::Matrix feat(k, g.feature_dim());
  std::vector<NodeId> ids(k);
  for (std::size_t a = 0; a < k; ++a) {
    const std::size_t pa = positions[a];
    ids[a] = g.node_ids()[pa];
    for (std::size_t b = 0; b < k; ++b) adj(a, b) = g.adjacency()(pa, positions[b]);
    for (std::size_t c = 0; c < g.feature_dim(); ++c) feat(a, c) = g.features()(pa, c);
  }
  return Graph(std::move(adj), std::move(feat), std::move(ids), g.label(), anchor);
}

}  // namespace

Graph induced_subgraph(const Graph& g, const NodeSet& s) {
  require(!s.empty(), ErrorCode::kEmptySelection, "induced_subgraph: empty node selection");
  std::vector<std::size_t> positions;
  positions.reserve(s.size());
  for (NodeId id : s.ids()) {
    auto pos = g.index_of(id);
    require(pos.has_value(), ErrorCode::kInvalidNode,
            "induced_subgraph: unknown node id " + std::to_string(id));
    positions.push_back(*pos);
  }
  // Keep parent order so relative ordering (and thus kernels) is stable.
  std::sort(positions.begin(), positions.end());
  return restrict(g, positions, std::nullopt);
}

Graph k_hop_neighborhood(const Graph& g, NodeId v, std::size_t k, std::size_t max_size) {
  require(k >= 1, ErrorCode::kInvalidArgument, "k_hop_neighborhood: k must be >= 1");
  require(max_size >= 1, ErrorCode::kInvalidArgument, "k_hop_neighborhood: max_size must be >= 1");
  auto start = g.index_of(v);
  require(start.has_value(), ErrorCode::kInvalidNode,
          "k_hop_neighborhood: unknown node id " + std::to_string(v));

  constexpr std::size_t kUnseen = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> hop(g.size(), kUnseen);
  hop[*start] = 0;
  std::deque<std::size_t> queue{*start};
  while (!queue.empty()) {
    std::size_t u = queue.front();
    queue.pop_front();
    if (hop[u] == k) continue;
    for (std::size_t w = 0; w < g.size(); ++w) {
      if (g.has_edge(u, w) && hop[w] == kUnseen) {
        hop[w] = hop[u] + 1;
        queue.push_back(w);
      }
    }
  }
  std::vector<std::size_t> others;
  for (std::size_t u = 0; u < g.size(); ++u)
    if (u != *start && hop[u] != kUnseen) others.push_back(u);
  std::sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) {
    if (hop[a] != hop[b]) return hop[a] < hop[b];
    return g.node_ids()[a] < g.node_ids()[b];
  });
  if (others.size() > max_size - 1) others.resize(max_size - 1);
  std::vector<std::size_t> positions{*start};
  positions.insert(positions.end(), others.begin(), others.end());
  return restrict(g, positions, std::size_t{0});
}

ProductGraph direct_product(const Graph& g1, const Graph& g2) {
  require(!g1.empty() && !g2.empty(), ErrorCode::kInvalidArgument,
          "direct_product: both graphs must be nonempty");
  const std::size_t n1 = g1.size();
  const std::size_t n2 = g2.size();
  num::Matrix adj(n1 * n2, n1 * n2);
  for (std::size_t v = 0; v < n1; ++v)
    for (std::size_t u = 0; u < n1; ++u) {
      const double w1 = g1.weight(v, u);
      if (w1 == 0.0) continue;
      for (std::size_t vp = 0; vp < n2; ++vp)
        for (std::size_t up = 0; up < n2; ++up)
          adj(v * n2 + vp, u * n2 + up) = w1 * g2.weight(vp, up);
    }
  ProductGraph out;
  out.graph = Graph(std::move(adj), num::Matrix(n1 * n2, 0));
  out.left_size = n1;
  out.right_size = n2;
  return out;
}

double iou_nodes(const NodeSet& a, const NodeSet& b) {
  require(a.root() == NodeSet::kUntagged || b.root() == NodeSet::kUntagged || a.root() == b.root(),
          ErrorCode::kIncompatibleSets, "iou_nodes: sets reference different root graphs");
  if (a.empty() && b.empty()) return 1.0;
  std::vector<NodeId> inter;
  std::set_intersection(a.ids().begin(), a.ids().end(), b.ids().begin(), b.ids().end(),
                        std::back_inserter(inter));
  const std::size_t uni = a.size() + b.size() - inter.size();
  return static_cast<double>(inter.size()) / static_cast<double>(uni);
}

Graph perturb_features(const Graph& g, double delta, const num::Matrix& pool, Rng& rng,
                       const NodeSet& excluded) {
  require(delta > 0.0 && delta < 1.0, ErrorCode::kInvalidArgument,
          "perturb_features: delta must lie in (0,1)");
  require(pool.rows() > 0, ErrorCode::kInvalidArgument, "perturb_features: empty feature pool");
  require(pool.cols() == g.feature_dim(), ErrorCode::kFeatureDim,
          "perturb_features: pool dim " + std::to_string(pool.cols()) + " != graph dim " +
              std::to_string(g.feature_dim()));
  num::Matrix feat = g.features();
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (excluded.contains(g.node_ids()[v])) continue;
    if (!rng.bernoulli(delta)) continue;
    const std::size_t row = rng.below(pool.rows());
    for (std::size_t c = 0; c < pool.cols(); ++c) feat(v, c) = pool(row, c);
  }
  return g.with_features(std::move(feat));
}

Graph perturb_edges(const Graph& g, double delta_add, double delta_remove, Rng& rng,
                    std::span<const Edge> protected_pairs) {
  require(delta_add > 0.0 && delta_add < 1.0 && delta_remove > 0.0 && delta_remove < 1.0,
          ErrorCode::kInvalidArgument, "perturb_edges: probabilities must lie in (0,1)");
  const std::size_t n = g.size();
  std::vector<char> locked(n * n, 0);
  for (auto [a, b] : protected_pairs) {
    require(a < n && b < n, ErrorCode::kInvalidNode, "perturb_edges: protected pair out of range");
    locked[a * n + b] = locked[b * n + a] = 1;
  }
  num::Matrix adj = g.adjacency();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (locked[i * n + j]) continue;
      if (adj(i, j) > 0.0) {
        if (rng.bernoulli(delta_remove)) adj(i, j) = adj(j, i) = 0.0;
      } else if (rng.bernoulli(delta_add)) {
        adj(i, j) = adj(j, i) = 1.0;
      }
    }
  return g.with_adjacency(std::move(adj));
}

std::vector<Edge> pairs_within(const Graph& g, const NodeSet& s) {
  std::vector<std::size_t> pos;
  for (std::size_t v = 0; v < g.size(); ++v)
    if (s.contains(g.node_ids()[v])) pos.push_back(v);
  std::vector<Edge> out;
  for (std::size_t a = 0; a < pos.size(); ++a)
    for (std::size_t b = a + 1; b < pos.size(); ++b) out.emplace_back(pos[a], pos[b]);
  return out;
}

}  // namespace xgkn
