// SPDX-License-Identifier: Apache-2.0
#include "livlr/graph.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "livlr/errors.hpp"

namespace livlr::graph {
namespace {

void require_nodes(const Tensor& nodes, const DenseGraph& g, const char* op) {
  if (nodes.rank() != 2 || nodes.dim(0) != g.n_nodes) {
    throw ShapeError(std::string(op) + ": node matrix " + shape_str(nodes.shape()) + " does not match a graph of " +
                     std::to_string(g.n_nodes) + " nodes");
  }
}

void require_square(const Tensor& w, std::size_t d, const char* what) {
  if (w.rank() != 2 || w.dim(0) != d || w.dim(1) != d) {
    throw ShapeError(std::string(what) + " must be [" + std::to_string(d) + "x" + std::to_string(d) + "], got " +
                     shape_str(w.shape()));
  }
}

Tensor adjacency_tensor(const DenseGraph& g, bool normalize) {
  const std::size_t n = g.n_nodes;
  std::vector<double> a(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cnt = g.neighbor_count(i);
    if (cnt == 0) continue;
    const double w = normalize ? 1.0 / static_cast<double>(cnt) : 1.0;
    for (std::size_t j = 0; j < n; ++j)
      if (g.adjacency(i, j)) a[i * n + j] = w;
  }
  return Tensor::matrix(n, n, std::move(a));
}

}  // namespace

DenseGraph DenseGraph::empty(std::size_t n) {
  DenseGraph g;
  g.n_nodes = n;
  g.adjacency = Mask(n, n);
  return g;
}

void DenseGraph::add_edge(std::size_t i, std::size_t j, std::int64_t type) {
  if (i >= n_nodes || j >= n_nodes) throw IntegrityError("edge endpoint out of range");
  if (i == j) throw IntegrityError("self loops are not representable; the residual carries the node itself");
  adjacency.set(i, j, true);
  if (type != 0) {
    if (edge_types.empty()) edge_types.assign(n_nodes * n_nodes, 0);
    edge_types[i * n_nodes + j] = type;
  }
}

std::size_t DenseGraph::edge_count() const {
  return static_cast<std::size_t>(std::count(adjacency.bits.begin(), adjacency.bits.end(), std::uint8_t{1}));
}

void DenseGraph::validate() const {
  if (adjacency.rows != n_nodes || adjacency.cols != n_nodes) throw IntegrityError("adjacency extent mismatch");
  for (std::size_t i = 0; i < n_nodes; ++i) {
    if (adjacency(i, i)) throw IntegrityError("adjacency diagonal must be false (node " + std::to_string(i) + ")");
  }
  if (edge_types.empty()) return;
  if (edge_types.size() != n_nodes * n_nodes) throw IntegrityError("edge type matrix extent mismatch");
  for (std::size_t i = 0; i < n_nodes; ++i) {
    for (std::size_t j = 0; j < n_nodes; ++j) {
      const auto t = edge_type(i, j);
      if (adjacency(i, j)) {
        if (t < 1 || t > static_cast<std::int64_t>(kSpatialEdgeTypes)) {
          throw IntegrityError("edge (" + std::to_string(i) + "," + std::to_string(j) + ") has no valid type label");
        }
      } else if (t != 0) {
        throw IntegrityError("type label on a non-edge (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }
}

DenseGraph DenseGraph::permuted(std::span<const std::size_t> perm) const {
  DenseGraph out = empty(n_nodes);
  if (typed()) out.edge_types.assign(n_nodes * n_nodes, 0);
  for (std::size_t a = 0; a < n_nodes; ++a) {
    for (std::size_t b = 0; b < n_nodes; ++b) {
      out.adjacency.set(a, b, adjacency(perm[a], perm[b]));
      if (typed()) out.edge_types[a * n_nodes + b] = edge_type(perm[a], perm[b]);
    }
  }
  return out;
}

Tensor attention_coefficients(const Tensor& Wq, const Tensor& Wk, const Tensor& nodes, const DenseGraph& g) {
  require_nodes(nodes, g, "attention_coefficients");
  const std::size_t d = nodes.dim(1);
  require_square(Wq, d, "Wq");
  require_square(Wk, d, "Wk");
  auto scores = ops::matmul(ops::matmul(nodes, Wq), ops::transpose(ops::matmul(nodes, Wk)));
  return ops::row_softmax(scores, &g.adjacency, ops::EmptyRow::kZero);
}

Tensor attn_gcn_layer(const AttnGcnLayer& layer, const Tensor& nodes, const DenseGraph& g) {
  require_nodes(nodes, g, "attn_gcn_layer");
  require_square(layer.W, nodes.dim(1), "W");
  auto alpha = attention_coefficients(layer.Wq, layer.Wk, nodes, g);
  auto messages = ops::matmul(alpha, ops::matmul(nodes, layer.W));
  return ops::relu(ops::add(nodes, messages));
}

Tensor typed_edge_gcn_layer(const TypedEdgeGcnLayer& layer, const Tensor& nodes, const DenseGraph& g) {
  require_nodes(nodes, g, "typed_edge_gcn_layer");
  const std::size_t n = g.n_nodes, d = nodes.dim(1);
  require_square(layer.W_sp, d, "W_sp");
  if (layer.b_edge.rank() != 1 || layer.b_edge.dim(0) != kSpatialEdgeTypes) {
    throw ShapeError("edge-type bias must be [11], got " + shape_str(layer.b_edge.shape()));
  }
  if (!g.typed() && g.edge_count() > 0) throw IntegrityError("typed_edge_gcn_layer: graph carries no edge types");

  std::vector<std::int64_t> index(n * n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!g.adjacency(i, j)) continue;
      const auto t = g.edge_type(i, j);
      if (t < 1 || t > static_cast<std::int64_t>(kSpatialEdgeTypes)) {
        throw IntegrityError("edge (" + std::to_string(i) + "," + std::to_string(j) + ") has no valid type label");
      }
      index[i * n + j] = t - 1;
    }
  }

  auto alpha = attention_coefficients(layer.Wq, layer.Wk, nodes, g);
  auto messages = ops::matmul(alpha, ops::matmul(nodes, layer.W_sp));
  // sum_j alpha(i,j) b(r(i,j)) is the same scalar for every channel of row i.
  auto bias = ops::gather(layer.b_edge, index, {n, n});
  auto per_row = ops::matmul(ops::mul(alpha, bias), Tensor::full({n, 1}, 1.0));
  auto spread = ops::matmul(per_row, Tensor::full({1, d}, 1.0));
  return ops::relu(ops::add(ops::add(nodes, messages), spread));
}

Tensor vanilla_gcn_layer(const Tensor& W, const Tensor& nodes, const DenseGraph& g, bool normalize) {
  require_nodes(nodes, g, "vanilla_gcn_layer");
  require_square(W, nodes.dim(1), "W");
  auto messages = ops::matmul(adjacency_tensor(g, normalize), ops::matmul(nodes, W));
  return ops::relu(ops::add(nodes, messages));
}

Mask top_k_per_row(std::span<const double> scores, std::size_t n, std::size_t k) {
  if (k == 0) throw ContractError("top-k sparsification needs k >= 1");
  if (scores.size() != n * n) throw ShapeError("score matrix does not have n*n entries");
  Mask keep(n, n);
  const std::size_t take = std::min(k, n > 0 ? n - 1 : 0);
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < n; ++i) {
    cols.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) cols.push_back(j);
    std::stable_sort(cols.begin(), cols.end(),
                     [&](std::size_t a, std::size_t b) { return scores[i * n + a] > scores[i * n + b]; });
    for (std::size_t r = 0; r < take; ++r) keep.set(i, cols[r], true);
  }
  return keep;
}

LearnedGraph learn_adjacency(const Tensor& W1, const Tensor& W2, const Tensor& nodes, std::size_t max_neighbors) {
  if (max_neighbors < 1) throw ContractError("learn_adjacency: N_n must be at least 1");
  if (nodes.rank() != 2) throw ShapeError("learn_adjacency: nodes must be [n x d]");
  const std::size_t n = nodes.dim(0), d = nodes.dim(1);
  require_square(W1, d, "W1");
  require_square(W2, d, "W2");
  LearnedGraph out;
  out.scores = ops::matmul(ops::matmul(nodes, W1), ops::transpose(ops::matmul(nodes, W2)));
  out.graph = DenseGraph::empty(n);
  out.graph.adjacency = top_k_per_row(out.scores.data(), n, max_neighbors);
  return out;
}

Tensor mean_pool(const Tensor& nodes, std::optional<std::span<const std::size_t>> subset) {
  if (nodes.rank() != 2) throw ShapeError("mean_pool: nodes must be [n x d], got " + shape_str(nodes.shape()));
  if (!subset) return ops::mean_rows(nodes);
  if (subset->empty()) throw ContractError("mean_pool: empty node subset");
  return ops::mean_rows(ops::gather_rows(nodes, *subset));
}

}  // namespace livlr::graph
