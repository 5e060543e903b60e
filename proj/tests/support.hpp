#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "xgkn/data/dataset.hpp"
#include "xgkn/graph.hpp"
#include "xgkn/model/model.hpp"
#include "xgkn/num/matrix.hpp"
#include "xgkn/rng.hpp"

namespace xgkn::fixtures {

// Erdős–Rényi graph with edge probability p; features are either the constant
// 1 or random binary rows of width feature_dim.
Graph random_graph(std::size_t n, double p, Rng& rng, std::size_t feature_dim = 1, bool binary_features = false);

num::Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0);

// Hop distances by Floyd–Warshall; unreachable = SIZE_MAX.
std::vector<std::vector<std::size_t>> all_pairs_hops(const Graph& g);

// Positions of the hood of v: v first, then (hop, id) order, truncated.
std::vector<std::size_t> hood_oracle(const Graph& g, std::size_t v, std::size_t k, std::size_t max_size);

// Σ_p Σ over length-p walk pairs of S(start) S(end) Π weights.
double walk_kernel_oracle(const num::Matrix& a1, const num::Matrix& a2, const num::Matrix& S, std::size_t P);

// Same, with every walk in a1 starting at `anchor` and each pair weighted by
// S(anchor, start in a2) S(end in a1, end in a2).
double anchored_walk_oracle(const num::Matrix& a1, const num::Matrix& a2, const num::Matrix& S,
                            std::size_t anchor, std::size_t P);

// Minimum over every partial injective node mapping (unit costs, binary edges,
// exact feature comparison).
double ged_oracle(const Graph& g1, const Graph& g2);

// Shapley values as averages of marginal contributions over all orders.
std::vector<double> permutation_shapley(const std::function<double(const std::vector<bool>&)>& value, std::size_t m);

// Random model of the given shape; z-normalization stats are randomized so
// the batch-norm stage is not an identity.
model::XgknModel random_model(const model::ModelConfig& cfg, std::uint64_t seed);

// Two classes of small random trees: class 1 carries a planted K4, class 0 a
// 4-node tail.
data::Dataset separable_toy(std::size_t n_graphs, std::uint64_t seed);

bool near_all(std::span<const double> a, std::span<const double> b, double tol);

}  // namespace xgkn::fixtures
