// SPDX-License-Identifier: Apache-2.0
//
// Straight-line reference implementations over plain row-major buffers.
// They share no code with the library beyond the parameter containers.

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "livlr/tensor.hpp"

namespace oracle {

struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return v[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
};

Mat from(const livlr::Tensor& t);
livlr::Tensor to_tensor(const Mat& m, bool requires_grad = false);
Mat random_mat(std::mt19937_64& rng, std::size_t r, std::size_t c, double scale = 1.0);

Mat matmul(const Mat& a, const Mat& b);
// x W + b with b added to every row.
Mat affine(const Mat& x, const Mat& W, const std::vector<double>& b);
Mat hconcat(const Mat& a, const Mat& b);
std::vector<double> mean_rows(const Mat& m);

// adj[i][j] true means j is a neighbour of i.
using Adj = std::vector<std::vector<bool>>;
Adj random_adj(std::mt19937_64& rng, std::size_t n, double p);

// alpha(i, j) over neighbours of i; rows without neighbours are zero.
Mat attention(const Mat& V, const Mat& Wq, const Mat& Wk, const Adj& adj);
Mat attn_gcn(const Mat& V, const Mat& W, const Mat& Wq, const Mat& Wk, const Adj& adj);
// types[i][j] in 1..11 on edges.
Mat typed_gcn(const Mat& V, const Mat& W, const std::vector<double>& b_edge, const Mat& Wq, const Mat& Wk,
              const Adj& adj, const std::vector<std::vector<int>>& types);
Mat vanilla_gcn(const Mat& V, const Mat& W, const Adj& adj, bool normalize);
// Brute force: repeatedly take the largest remaining off-diagonal score,
// lowest column on ties.
Adj top_k(const Mat& scores, std::size_t k);
Mat bilinear_scores(const Mat& V, const Mat& W1, const Mat& W2);

struct Head {
  Mat Wq, Wk, Wv, Wo;  // Wo empty when absent
};
Mat question_attention(const std::vector<Head>& heads, const Mat& X, const Mat& Q);

// Rows of `nodes` multiplied by table row sources[i] - 1.
Mat index_embedding(const Mat& table, const Mat& nodes, const std::vector<std::size_t>& sources);

// Attention per source, stack, optional index modulation, learned top-k
// graph, one vanilla GCN layer, mean over nodes.
std::vector<double> davl(const std::vector<std::vector<Head>>& attention, const std::vector<Mat>& sources,
                         const Mat& Q, const Mat* index_table, const Mat& W1, const Mat& W2, const Mat& W,
                         std::size_t k, bool normalize);

// Final hidden state of one LSTM direction; gates i | f | g | o.
std::vector<double> lstm(const Mat& seq, const Mat& Wx, const Mat& Wh, const std::vector<double>& b, bool reverse);

double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace oracle
