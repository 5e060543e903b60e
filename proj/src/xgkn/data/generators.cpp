#include <algorithm>
#include <array>

#include "xgkn/data/dataset.hpp"
#include "xgkn/error.hpp"

namespace xgkn::data {

std::vector<Edge> barabasi_albert_edges(std::size_t n, Rng& rng) {
  std::vector<Edge> edges;
  if (n < 2) return edges;
  edges.emplace_back(0, 1);
  // Each endpoint occurrence is one unit of degree, so a uniform pick from
  // this list is a degree-proportional pick.
  std::vector<std::size_t> ends = {0, 1};
  for (std::size_t v = 2; v < n; ++v) {
    const std::size_t target = ends[rng.below(ends.size())];
    edges.emplace_back(target, v);
    ends.push_back(target);
    ends.push_back(v);
  }
  return edges;
}

Graph house_motif() {
  const std::array<Edge, 6> e = {{{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 4}, {1, 4}}};
  return Graph::from_edges(5, e);
}

Graph cycle_motif(std::size_t n) {
  require(n >= 3, ErrorCode::kInvalidArgument, "cycle_motif: need at least 3 nodes");
  std::vector<Edge> e;
  for (std::size_t i = 0; i < n; ++i) e.emplace_back(i, (i + 1) % n);
  return Graph::from_edges(n, e);
}

Graph grid_motif(std::size_t rows, std::size_t cols) {
  require(rows >= 1 && cols >= 1, ErrorCode::kInvalidArgument, "grid_motif: empty grid");
  std::vector<Edge> e;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t v = r * cols + c;
      if (c + 1 < cols) e.emplace_back(v, v + 1);
      if (r + 1 < rows) e.emplace_back(v, v + cols);
    }
  return Graph::from_edges(rows * cols, e);
}

Graph wheel_motif(std::size_t spokes) {
  require(spokes >= 3, ErrorCode::kInvalidArgument, "wheel_motif: need at least 3 spokes");
  // Hub 0, rim 1..spokes.
  std::vector<Edge> e;
  for (std::size_t i = 1; i <= spokes; ++i) {
    e.emplace_back(0, i);
    e.emplace_back(i, i % spokes + 1);
  }
  return Graph::from_edges(spokes + 1, e);
}

namespace {

struct Planted {
  Graph graph;
  std::vector<NodeId> motif_nodes;
};

// BA base on [0, base) followed by each motif in order, each joined to a
// uniformly chosen base node by one edge from a uniformly chosen motif node.
Planted plant(std::size_t base, const std::vector<const Graph*>& motifs, int label, Rng& rng) {
  std::vector<Edge> edges = barabasi_albert_edges(base, rng);
  std::vector<NodeId> motif_nodes;
  std::size_t n = base;
  for (const Graph* m : motifs) {
    for (const auto& [i, j] : m->edges()) edges.emplace_back(n + i, n + j);
    const std::size_t from = n + rng.below(m->size());
    const std::size_t to = rng.below(base);
    edges.emplace_back(to, from);
    for (std::size_t i = 0; i < m->size(); ++i) motif_nodes.push_back(n + i);
    n += m->size();
  }
  return {Graph::from_edges(n, edges, label), std::move(motif_nodes)};
}

std::vector<int> balanced_labels(std::size_t n_graphs, Rng& rng) {
  std::vector<int> labels(n_graphs);
  for (std::size_t i = 0; i < n_graphs; ++i) labels[i] = i < n_graphs / 2 ? 0 : 1;
  rng.shuffle(labels);
  return labels;
}

}  // namespace

Dataset generate_ba2motifs(std::size_t n_graphs, Rng& rng) {
  require(n_graphs > 0 && n_graphs % 2 == 0, ErrorCode::kInvalidArgument,
          "generate_ba2motifs: n_graphs must be positive and even");
  const Graph house = house_motif();
  const Graph cycle = cycle_motif(5);
  Dataset ds;
  ds.name = "BA2Motifs";
  ds.num_classes = 2;
  ds.feature_policy = FeaturePolicy::kConstant;
  ds.gt_motifs = {house, cycle};
  for (int label : balanced_labels(n_graphs, rng)) {
    auto p = plant(20, {label == 0 ? &house : &cycle}, label, rng);
    const std::uint64_t root = ds.graphs.size();
    ds.graphs.push_back(std::move(p.graph));
    ds.gt_instance_masks.emplace_back(NodeSet(std::move(p.motif_nodes), root));
  }
  return ds;
}

Dataset generate_bamultishapes(std::size_t n_graphs, Rng& rng) {
  require(n_graphs > 0 && n_graphs % 2 == 0, ErrorCode::kInvalidArgument,
          "generate_bamultishapes: n_graphs must be positive and even");
  const Graph house = house_motif();
  const Graph grid = grid_motif(3, 3);
  const Graph wheel = wheel_motif(6);
  const std::array<const Graph*, 3> all = {&house, &grid, &wheel};
  // Motif subsets as bitmasks over (house, grid, wheel).
  const std::array<unsigned, 5> class0 = {0b000, 0b001, 0b010, 0b100, 0b111};
  const std::array<unsigned, 3> class1 = {0b011, 0b101, 0b110};

  Dataset ds;
  ds.name = "BAMultiShapes";
  ds.num_classes = 2;
  ds.feature_policy = FeaturePolicy::kConstant;
  ds.gt_motifs = {house, grid, wheel};
  for (int label : balanced_labels(n_graphs, rng)) {
    const unsigned pattern = label == 0 ? class0[rng.below(class0.size())] : class1[rng.below(class1.size())];
    std::vector<const Graph*> motifs;
    for (std::size_t k = 0; k < all.size(); ++k)
      if (pattern & (1u << k)) motifs.push_back(all[k]);
    auto p = plant(40, motifs, label, rng);
    const std::uint64_t root = ds.graphs.size();
    ds.graphs.push_back(std::move(p.graph));
    if (p.motif_nodes.empty())
      ds.gt_instance_masks.emplace_back(std::nullopt);
    else
      ds.gt_instance_masks.emplace_back(NodeSet(std::move(p.motif_nodes), root));
  }
  return ds;
}

}  // namespace xgkn::data
