#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "xgkn/num/matrix.hpp"
#include "xgkn/rng.hpp"

namespace xgkn {

using NodeId = std::size_t;
using Edge = std::pair<std::size_t, std::size_t>;

// Small undirected graph with dense symmetric adjacency (zero diagonal) and
// one feature row per node. Immutable once built.
//
// node_ids carry the original ids of the root graph: the identity for root
// graphs, the parent's ids for induced subgraphs. Operations that take node ids
// resolve them against node_ids, so root-graph ids and positions coincide.
class Graph {
 public:
  Graph() = default;
  Graph(num::Matrix adjacency, num::Matrix features, std::vector<NodeId> node_ids = {},
        std::optional<int> label = std::nullopt, std::optional<std::size_t> anchor = std::nullopt);

  // Binary graph from an undirected edge list over positions [0, n).
  static Graph from_edges(std::size_t n, std::span<const Edge> edges, num::Matrix features,
                          std::optional<int> label = std::nullopt);
  // Same, with a constant scalar feature of 1 per node.
  static Graph from_edges(std::size_t n, std::span<const Edge> edges,
                          std::optional<int> label = std::nullopt);

  std::size_t size() const noexcept { return adjacency_.rows(); }
  bool empty() const noexcept { return size() == 0; }
  std::size_t feature_dim() const noexcept { return features_.cols(); }
  const num::Matrix& adjacency() const noexcept { return adjacency_; }
  const num::Matrix& features() const noexcept { return features_; }
  const std::vector<NodeId>& node_ids() const noexcept { return node_ids_; }
  std::optional<int> label() const noexcept { return label_; }
  std::optional<std::size_t> anchor() const noexcept { return anchor_; }

  double weight(std::size_t i, std::size_t j) const { return adjacency_(i, j); }
  bool has_edge(std::size_t i, std::size_t j) const { return adjacency_(i, j) > 0.0; }
  std::size_t degree(std::size_t i) const;
  std::size_t edge_count() const;
  // Undirected edges (i < j) over positions.
  std::vector<Edge> edges() const;
  std::vector<std::size_t> neighbors(std::size_t i) const;
  // Position of original id, or nullopt.
  std::optional<std::size_t> index_of(NodeId id) const;
  double density() const;

  Graph with_label(std::optional<int> label) const;
  Graph with_features(num::Matrix features) const;
  Graph with_adjacency(num::Matrix adjacency) const;

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  num::Matrix adjacency_;
  num::Matrix features_;
  std::vector<NodeId> node_ids_;
  std::optional<int> label_;
  std::optional<std::size_t> anchor_;
};

// Sorted, duplicate-free node ids referencing one root graph. `root` tags the
// root graph (e.g. dataset index); untagged sets are compatible with anything.
class NodeSet {
 public:
  static constexpr std::uint64_t kUntagged = ~std::uint64_t{0};

  NodeSet() = default;
  explicit NodeSet(std::vector<NodeId> ids, std::uint64_t root = kUntagged);

  const std::vector<NodeId>& ids() const noexcept { return ids_; }
  std::uint64_t root() const noexcept { return root_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  bool contains(NodeId id) const;

  friend bool operator==(const NodeSet&, const NodeSet&) = default;

 private:
  std::vector<NodeId> ids_;
  std::uint64_t root_ = kUntagged;
};

Graph induced_subgraph(const Graph& g, const NodeSet& s);

// Nodes within hop distance k of v. When more than max_size qualify, keeps v
// plus the nearest (max_size - 1) by hop, ties by ascending node id. The anchor
// v sits at position 0; the rest follow in (hop, id) order.
Graph k_hop_neighborhood(const Graph& g, NodeId v, std::size_t k, std::size_t max_size);

struct ProductGraph {
  Graph graph;
  std::size_t left_size = 0;
  std::size_t right_size = 0;

  std::size_t index(std::size_t left, std::size_t right) const { return left * right_size + right; }
  std::pair<std::size_t, std::size_t> pair_of(std::size_t index) const {
    return {index / right_size, index % right_size};
  }
};

// Tensor (direct) product: (v,v') ~ (u,u') iff v~u and v'~u', weighted by the
// product of the two edge weights. Product nodes carry no features.
ProductGraph direct_product(const Graph& g1, const Graph& g2);

double iou_nodes(const NodeSet& a, const NodeSet& b);

// Each node outside `excluded` independently takes, with probability delta, a
// feature row drawn uniformly (with replacement) from pool rows.
Graph perturb_features(const Graph& g, double delta, const num::Matrix& pool, Rng& rng,
                       const NodeSet& excluded = {});

// Each unprotected existing edge is removed with probability delta_remove and
// each unprotected absent pair gains a unit edge with probability delta_add.
// Protected pairs are given as positions; no self-loops are created.
Graph perturb_edges(const Graph& g, double delta_add, double delta_remove, Rng& rng,
                    std::span<const Edge> protected_pairs = {});

// All position pairs (i < j) with both endpoints in s, edges or not.
std::vector<Edge> pairs_within(const Graph& g, const NodeSet& s);

}  // namespace xgkn
