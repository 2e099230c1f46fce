// SPDX-License-Identifier: Apache-2.0
//
// Graph layers shared by the encoders and the integration module.
//
// Node embeddings are the rows of an [n x d] tensor. A transform written
// W v_j acts on row j as (V W)_j, so every weight is stored [in x out].

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "livlr/ops.hpp"
#include "livlr/tensor.hpp"

namespace livlr::graph {

inline constexpr std::size_t kSpatialEdgeTypes = 11;

// adjacency(i, j) == true means j is a neighbour of i. The diagonal is always
// false: the residual term of every layer carries the node's own embedding.
struct DenseGraph {
  std::size_t n_nodes = 0;
  Mask adjacency;
  // Row-major n x n labels in 1..11 on edges and 0 elsewhere; empty when the
  // graph is untyped.
  std::vector<std::int64_t> edge_types;

  static DenseGraph empty(std::size_t n);

  bool typed() const { return !edge_types.empty(); }
  bool has_edge(std::size_t i, std::size_t j) const { return adjacency(i, j); }
  std::int64_t edge_type(std::size_t i, std::size_t j) const { return edge_types[i * n_nodes + j]; }
  void add_edge(std::size_t i, std::size_t j, std::int64_t type = 0);
  std::size_t neighbor_count(std::size_t i) const { return adjacency.row_count(i); }
  std::size_t edge_count() const;

  // Throws IntegrityError on a true diagonal entry or on labels that do not
  // line up with the adjacency.
  void validate() const;

  // Relabels nodes so that new node k is old node perm[k].
  DenseGraph permuted(std::span<const std::size_t> perm) const;
};

struct AttnGcnLayer {
  Tensor W;   // message transform [d x d]
  Tensor Wq;  // attention query transform [d x d]
  Tensor Wk;  // attention key transform [d x d]
};

struct TypedEdgeGcnLayer {
  Tensor W_sp;    // message transform [d x d]
  Tensor b_edge;  // one learnable scalar per edge type [11]
  Tensor Wq;
  Tensor Wk;
};

// alpha(i, j) = softmax over j in N(i) of (Wq v_i) . (Wk v_j); zero outside
// N(i), and an all-zero row when N(i) is empty.
Tensor attention_coefficients(const Tensor& Wq, const Tensor& Wk, const Tensor& nodes, const DenseGraph& g);

// v_i' = ReLU(v_i + sum_j alpha(i, j) W v_j)
Tensor attn_gcn_layer(const AttnGcnLayer& layer, const Tensor& nodes, const DenseGraph& g);

// Messages W_sp v_j (+) b_edge[r(i, j)], otherwise as attn_gcn_layer.
Tensor typed_edge_gcn_layer(const TypedEdgeGcnLayer& layer, const Tensor& nodes, const DenseGraph& g);

// v_i' = ReLU(v_i + c_i sum_{j in N(i)} W v_j) with c_i = 1/|N(i)| when
// `normalize` is set and 1 otherwise.
Tensor vanilla_gcn_layer(const Tensor& W, const Tensor& nodes, const DenseGraph& g, bool normalize);

struct LearnedGraph {
  Tensor scores;  // (V W1)(V W2)^T, [n x n]
  DenseGraph graph;
};

// Keeps, per row, the min(k, n - 1) largest off-diagonal entries. Ties go to
// the lower column index.
Mask top_k_per_row(std::span<const double> scores, std::size_t n, std::size_t k);

LearnedGraph learn_adjacency(const Tensor& W1, const Tensor& W2, const Tensor& nodes, std::size_t max_neighbors);

// Arithmetic mean over all rows, or over `subset` when given.
Tensor mean_pool(const Tensor& nodes, std::optional<std::span<const std::size_t>> subset = std::nullopt);

}  // namespace livlr::graph
