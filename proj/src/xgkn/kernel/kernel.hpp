#pragma once

#include <cstddef>
#include <vector>

#include "xgkn/graph.hpp"
#include "xgkn/num/matrix.hpp"
#include "xgkn/num/tape.hpp"
#include "xgkn/rng.hpp"

namespace xgkn::kernel {

// Linear map from raw node features (d) to embeddings (d_embed); embeddings
// are L2-normalized per row before any similarity is taken.
struct Encoder {
  num::Parameter weight;  // d × d_embed

  static Encoder random(std::size_t d, std::size_t d_embed, Rng& rng);
  std::size_t input_dim() const { return weight.value.rows(); }
  std::size_t embed_dim() const { return weight.value.cols(); }
  // Row-normalized embeddings; zero-norm rows stay zero and are reported.
  num::Matrix embed(const num::Matrix& features, std::vector<std::size_t>* zero_rows = nullptr) const;
  num::Var embed(num::Tape& tape, const num::Matrix& features);
};

// Trainable graph: adjacency = sigmoid((B + Bᵀ)/2) off the diagonal, plus one
// feature row per node in the encoder's embedding space.
struct GraphFilter {
  num::Parameter logits;    // B, size × size
  num::Parameter features;  // size × d_embed

  static GraphFilter random(std::size_t size, std::size_t d_embed, Rng& rng);
  std::size_t size() const { return logits.value.rows(); }
  num::Matrix adjacency() const;
  // Continuous graph view (weighted adjacency, embedding features).
  Graph to_graph() const;
};

// S = rownorm(encoder(gv)) · rownorm(filter features)ᵀ.
num::Matrix node_pair_similarity(const Graph& gv, const GraphFilter& filter, const Encoder& encoder,
                                 std::vector<std::size_t>* zero_rows = nullptr);

// Σ_{p=0..P} sᵀ A×^p s with s = vec(S); S is |g1|×|g2|. Runs X ← A1 X A2
// instead of forming the product graph.
double rw_kernel(const Graph& g1, const Graph& g2, std::size_t P, const num::Matrix& S);

// Walks p = 0..P from the anchor: row p holds A^p e_anchor.
num::Matrix anchor_walks(const num::Matrix& adjacency, std::size_t anchor, std::size_t P);

// Anchored kernel on raw matrices: only product walks whose first node is
// (anchor, ·) are counted, Σ_p t_pᵀ S A_h^p S[anchor,:]ᵀ with t_p = A_g^p e_anchor.
double anchored_rw_kernel(const num::Matrix& a_g, const num::Matrix& a_h, const num::Matrix& S,
                          std::size_t anchor, std::size_t P);
// gv must carry its anchor; walk cap is the filter size.
double anchored_rw_kernel(const Graph& gv, const GraphFilter& filter, const Encoder& encoder);

// Cached neighborhood of one node: its positions in the parent graph (anchor
// first) and its anchored walk vectors.
struct AnchoredHood {
  std::vector<std::size_t> positions;
  num::Matrix walks;  // (P+1) × |hood|
};

std::vector<AnchoredHood> anchored_hoods(const Graph& g, std::size_t k, std::size_t max_size,
                                         std::size_t P);

// Differentiable kernel column: entry v is the anchored kernel of hood v
// against a filter, where s_full (n × size) is the node–filter similarity of
// the whole graph and a_h the filter adjacency. Output n × 1.
num::Var anchored_response(num::Var s_full, num::Var a_h, const std::vector<AnchoredHood>& hoods);

struct KernelResponse {
  num::Matrix R;  // n × m
  std::size_t nodes() const { return R.rows(); }
  std::size_t filters() const { return R.cols(); }
};

KernelResponse f_sim(const Graph& g, const std::vector<GraphFilter>& filters, const Encoder& encoder,
                     std::size_t k, std::size_t max_size);

}  // namespace xgkn::kernel
