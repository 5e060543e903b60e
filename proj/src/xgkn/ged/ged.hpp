#pragma once

#include <cstddef>

#include "xgkn/data/dataset.hpp"
#include "xgkn/graph.hpp"
#include "xgkn/kernel/kernel.hpp"

namespace xgkn::ged {

// Largest graph the exact search accepts.
inline constexpr std::size_t kMaxNodes = 12;

struct EditCosts {
  double node_insert = 1.0;
  double node_delete = 1.0;
  double node_substitute = 1.0;  // charged when feature rows differ
  double edge_insert = 1.0;
  double edge_delete = 1.0;
  double feature_tol = 1e-9;     // max |difference| per coordinate for equal rows

  void validate() const;
};

// Minimal edit cost from g1 to g2 over binary structure (an edge is any
// positive weight). Depth-first branch and bound over node assignments.
double ged_exact(const Graph& g1, const Graph& g2, const EditCosts& costs = {});

// ged_exact divided by the cost of deleting all of g1 and inserting all of g2.
double ged_normalized(const Graph& g1, const Graph& g2, const EditCosts& costs = {});

// Maps continuous filter features back to discrete dataset features.
class FeatureQuantizer {
 public:
  // Every node gets the constant feature 1.
  static FeatureQuantizer unlabeled();
  // Nearest (by cosine in embedding space) among the distinct raw feature
  // rows of the dataset; collapses to unlabeled for constant features.
  static FeatureQuantizer from_dataset(const data::Dataset& ds, const kernel::Encoder& encoder);

  num::Matrix quantize(const num::Matrix& filter_features) const;
  bool is_unlabeled() const { return raw_.empty(); }

 private:
  num::Matrix raw_;       // distinct raw rows
  num::Matrix embedded_;  // their normalized embeddings
};

// Edge iff adjacency >= edge_threshold; features via the quantizer.
Graph binarize_filter(const kernel::GraphFilter& filter, double edge_threshold = 0.5,
                      const FeatureQuantizer& quantizer = FeatureQuantizer::unlabeled());

}  // namespace xgkn::ged
