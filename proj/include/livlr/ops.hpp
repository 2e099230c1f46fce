// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "livlr/tensor.hpp"

namespace livlr {

// Row-major boolean matrix. Used for softmax masks and graph adjacency.
struct Mask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(std::size_t r, std::size_t c, bool fill = false) : rows(r), cols(c), bits(r * c, fill ? 1 : 0) {}

  bool operator()(std::size_t i, std::size_t j) const { return bits[i * cols + j] != 0; }
  void set(std::size_t i, std::size_t j, bool v) { bits[i * cols + j] = v ? 1 : 0; }
  std::size_t row_count(std::size_t i) const;
};

namespace ops {

// [m x k] * [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Binary elementwise ops accept equal shapes, a single-element operand
// (scalar broadcast), or a [n] / [1 x n] operand against an [m x n] one
// (row broadcast). Anything else is a ShapeError.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);

// ReLU uses the 0-at-0 subgradient.
Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);

enum class EmptyRow {
  kError,  // a fully masked row is a ContractError
  kZero,   // a fully masked row produces zeros
};

// Softmax over the last axis of a rank-2 tensor. Masked entries are exactly
// zero and take no part in the normalization.
Tensor row_softmax(const Tensor& x, const Mask* mask = nullptr, EmptyRow empty = EmptyRow::kError);

// Concatenation along the last axis. All parts share rank (1 or 2) and, for
// rank 2, the row count.
Tensor concat(const std::vector<Tensor>& parts);

// Stacks rank-1 [d] tensors as rows and appends rank-2 [k x d] blocks.
Tensor stack_rows(const std::vector<Tensor>& parts);

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
// Row i of a rank-2 tensor as a rank-1 tensor.
Tensor row(const Tensor& x, std::size_t i);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);

// out[k] = table[index[k]] for a rank-1 table; negative indices yield a
// constant 0 with no gradient path.
Tensor gather(const Tensor& table, std::span<const std::int64_t> index, Shape out_shape);

// [n x d] -> [d]
Tensor mean_rows(const Tensor& x);
// Sum of all elements -> [1]
Tensor sum(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

}  // namespace ops
}  // namespace livlr
