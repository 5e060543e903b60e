#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xgkn/graph.hpp"
#include "xgkn/rng.hpp"

namespace xgkn::data {

enum class FeaturePolicy {
  kConstant,      // scalar 1 per node
  kOneHotLabel,   // one-hot node labels (as parsed)
  kDegree,        // scalar degree
  kOneHotDegree,  // one-hot of min(degree, cap)
};

const char* feature_policy_name(FeaturePolicy policy);
FeaturePolicy parse_feature_policy(const std::string& name);

struct Dataset {
  std::string name;
  std::vector<Graph> graphs;
  // Either empty (no ground truth at all) or one entry per graph; nullopt or
  // an empty set means that graph has no instance-level ground truth.
  std::vector<std::optional<NodeSet>> gt_instance_masks;
  // Model-level ground truths (reference motifs).
  std::vector<Graph> gt_motifs;
  int num_classes = 0;
  FeaturePolicy feature_policy = FeaturePolicy::kConstant;

  std::size_t size() const noexcept { return graphs.size(); }
  std::size_t feature_dim() const { return graphs.empty() ? 0 : graphs.front().feature_dim(); }
  bool has_instance_masks() const;
  int label(std::size_t i) const;
  // Checks labels, masks and feature dimensions; throws on violation.
  void validate() const;
  // Every node feature row of the listed graphs (all graphs when empty).
  num::Matrix feature_pool(const std::vector<std::size_t>& graph_ids = {}) const;
  double average_density() const;
  // FNV-1a 64 over a canonical byte serialization.
  std::uint64_t content_hash() const;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::size_t fold = 0;
  std::uint64_t seed = 0;
};

// ---- TU flat-file format ---------------------------------------------------

Dataset parse_tu_dataset(const std::filesystem::path& directory, const std::string& name);
// Writes <name>_A, _graph_indicator, _graph_labels and _node_attributes.
void write_tu_dataset(const Dataset& ds, const std::filesystem::path& directory);

// Ground-truth sidecar: one line per graph, whitespace-separated node ids;
// a blank line means no ground truth for that graph.
Dataset load_ground_truth_masks(Dataset ds, const std::filesystem::path& sidecar);
void write_ground_truth_masks(const Dataset& ds, const std::filesystem::path& sidecar);

// ---- synthetic benchmarks --------------------------------------------------

// Barabási–Albert graph with one edge per new node, on node ids [0, n).
std::vector<Edge> barabasi_albert_edges(std::size_t n, Rng& rng);

Graph house_motif();
Graph cycle_motif(std::size_t n);
Graph grid_motif(std::size_t rows, std::size_t cols);
Graph wheel_motif(std::size_t spokes);

// 20-node BA base + house (class 0) or 5-cycle (class 1), joined by one edge.
Dataset generate_ba2motifs(std::size_t n_graphs, Rng& rng);
// 40-node BA base + a subset of {house, 3x3 grid, 6-spoke wheel}; class 1 iff
// exactly two motif types are planted.
Dataset generate_bamultishapes(std::size_t n_graphs, Rng& rng);

// ---- features and splits ---------------------------------------------------

// Largest node degree over the listed graphs (all when empty).
std::size_t max_degree(const Dataset& ds, const std::vector<std::size_t>& graph_ids = {});

// degree_cap applies to kOneHotDegree only (buckets 0..cap).
Dataset apply_feature_policy(Dataset ds, FeaturePolicy policy, std::size_t degree_cap = 0);

std::vector<Split> stratified_split(const Dataset& ds, double test_fraction, std::size_t n_repeats,
                                    std::uint64_t seed);

}  // namespace xgkn::data
