// SPDX-License-Identifier: Apache-2.0
#include "livlr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "livlr/errors.hpp"

namespace livlr {

std::size_t Mask::row_count(std::size_t i) const {
  std::size_t n = 0;
  for (std::size_t j = 0; j < cols; ++j) n += bits[i * cols + j] ? 1 : 0;
  return n;
}

namespace ops {
namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     shape_str(t.shape()));
  }
}

enum class Bcast { kSame, kScalarB, kScalarA, kRowB, kRowA };

// Trailing extent of a rank-1 [n] or rank-2 [1 x n] operand, 0 otherwise.
std::size_t row_vector_extent(const Shape& s) {
  if (s.size() == 1) return s[0];
  if (s.size() == 2 && s[0] == 1) return s[1];
  return 0;
}

Bcast classify(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Bcast::kSame;
  if (b.numel() == 1) return Bcast::kScalarB;
  if (a.numel() == 1) return Bcast::kScalarA;
  if (a.rank() == 2 && row_vector_extent(b.shape()) == a.dim(1)) return Bcast::kRowB;
  if (b.rank() == 2 && row_vector_extent(a.shape()) == b.dim(1)) return Bcast::kRowA;
  throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a.shape()) + " with " +
                   shape_str(b.shape()));
}

struct BinaryLayout {
  Shape out_shape;
  std::size_t n = 0;
  Bcast mode = Bcast::kSame;
  std::size_t row = 0;

  std::size_t ia(std::size_t i) const {
    switch (mode) {
      case Bcast::kScalarA: return 0;
      case Bcast::kRowA: return i % row;
      default: return i;
    }
  }
  std::size_t ib(std::size_t i) const {
    switch (mode) {
      case Bcast::kScalarB: return 0;
      case Bcast::kRowB: return i % row;
      default: return i;
    }
  }
};

BinaryLayout layout(const Tensor& a, const Tensor& b, const char* op) {
  BinaryLayout l;
  l.mode = classify(a, b, op);
  const bool out_is_b = l.mode == Bcast::kScalarA || l.mode == Bcast::kRowA;
  l.out_shape = out_is_b ? b.shape() : a.shape();
  l.n = shape_numel(l.out_shape);
  l.row = l.out_shape.back();
  return l;
}

template <typename Fwd, typename DA, typename DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, DA da, DB db) {
  auto l = layout(a, b, name);
  auto ad = a.data();
  auto bd = b.data();
  std::vector<double> out(l.n);
  for (std::size_t i = 0; i < l.n; ++i) out[i] = fwd(ad[l.ia(i)], bd[l.ib(i)]);
  return record_op(l.out_shape, std::move(out), {a, b}, [a, b, l, da, db](const BackwardArgs& args) {
    auto ga = grad_sink(a);
    auto gb = grad_sink(b);
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < l.n; ++i) {
      const double g = args.grad_out[i];
      if (g == 0.0) continue;
      const double x = ad[l.ia(i)];
      const double y = bd[l.ib(i)];
      if (!ga.empty()) ga[l.ia(i)] += g * da(x, y);
      if (!gb.empty()) gb[l.ib(i)] += g * db(x, y);
    }
  });
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = fwd(xd[i]);
  return record_op(x.shape(), std::move(out), {x}, [x, deriv](const BackwardArgs& args) {
    auto gx = grad_sink(x);
    if (gx.empty()) return;
    auto xd = x.data();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += args.grad_out[i] * deriv(xd[i], args.out[i]);
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto ad = a.data();
  auto bd = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[i * k + p];
      if (av == 0.0) continue;
      const double* brow = &bd[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return record_op({m, n}, std::move(out), {a, b}, [a, b, m, k, n](const BackwardArgs& args) {
    auto g = args.grad_out;
    auto ga = grad_sink(a);
    auto gb = grad_sink(b);
    auto ad = a.data();
    auto bd = b.data();
    if (!ga.empty()) {
      // ga += g * b^T
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bd[p * n + j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (!gb.empty()) {
      // gb += a^T * g
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double av = ad[i * k + p];
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  auto ad = a.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = ad[i * n + j];
  return record_op({n, m}, std::move(out), {a}, [a, m, n](const BackwardArgs& args) {
    auto ga = grad_sink(a);
    if (ga.empty()) return;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += args.grad_out[j * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(
      a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); }, [](double, double y) { return y * (1.0 - y); });
}

Tensor row_softmax(const Tensor& x, const Mask* mask, EmptyRow empty) {
  require_rank(x, 2, "row_softmax");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (mask && (mask->rows != m || mask->cols != n)) {
    throw ShapeError("row_softmax: mask " + shape_str({mask->rows, mask->cols}) + " does not match " +
                     shape_str(x.shape()));
  }
  auto xd = x.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask && !(*mask)(i, j)) continue;
      any = true;
      mx = std::max(mx, xd[i * n + j]);
    }
    if (!any) {
      if (empty == EmptyRow::kError) {
        throw ContractError("row_softmax: row " + std::to_string(i) + " is fully masked");
      }
      continue;
    }
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask && !(*mask)(i, j)) continue;
      const double e = std::exp(xd[i * n + j] - mx);
      out[i * n + j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
  return record_op({m, n}, std::move(out), {x}, [x, m, n](const BackwardArgs& args) {
    auto gx = grad_sink(x);
    if (gx.empty()) return;
    // dx_j = y_j (g_j - sum_k g_k y_k); masked entries have y = 0.
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += args.grad_out[i * n + j] * args.out[i * n + j];
      for (std::size_t j = 0; j < n; ++j) {
        const double y = args.out[i * n + j];
        if (y != 0.0) gx[i * n + j] += y * (args.grad_out[i * n + j] - dot);
      }
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const std::size_t rank = parts[0].rank();
  if (rank != 1 && rank != 2) throw ShapeError("concat: rank must be 1 or 2");
  const std::size_t rows = rank == 1 ? 1 : parts[0].dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != rank || (rank == 2 && p.dim(0) != rows)) {
      throw ShapeError("concat: mismatched part " + shape_str(p.shape()) + " against " +
                       shape_str(parts[0].shape()));
    }
    widths.push_back(p.shape().back());
    total += widths.back();
  }
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto pd = parts[k].data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(&pd[r * widths[k]], widths[k], &out[r * total + offset]);
    offset += widths[k];
  }
  Shape shape = rank == 1 ? Shape{total} : Shape{rows, total};
  return record_op(shape, std::move(out), parts, [parts, widths, rows, total](const BackwardArgs& args) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      auto g = grad_sink(parts[k]);
      if (!g.empty()) {
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < widths[k]; ++c) g[r * widths[k] + c] += args.grad_out[r * total + offset + c];
      }
      offset += widths[k];
    }
  });
}

Tensor stack_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("stack_rows: no inputs");
  const std::size_t width = parts[0].shape().back();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if ((p.rank() != 1 && p.rank() != 2) || p.shape().back() != width) {
      throw ShapeError("stack_rows: part " + shape_str(p.shape()) + " does not have width " + std::to_string(width));
    }
    rows += p.rank() == 1 ? 1 : p.dim(0);
  }
  std::vector<double> out;
  out.reserve(rows * width);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return record_op({rows, width}, std::move(out), parts, [parts](const BackwardArgs& args) {
    std::size_t offset = 0;
    for (const auto& p : parts) {
      auto g = grad_sink(p);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += args.grad_out[offset + i];
      offset += p.numel();
    }
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank(x, 2, "slice_rows");
  if (begin >= end || end > x.dim(0)) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for shape " + shape_str(x.shape()));
  }
  const std::size_t w = x.dim(1);
  auto xd = x.data();
  std::vector<double> out(xd.begin() + static_cast<std::ptrdiff_t>(begin * w),
                          xd.begin() + static_cast<std::ptrdiff_t>(end * w));
  return record_op({end - begin, w}, std::move(out), {x}, [x, begin, w](const BackwardArgs& args) {
    auto g = grad_sink(x);
    if (g.empty()) return;
    for (std::size_t i = 0; i < args.grad_out.size(); ++i) g[begin * w + i] += args.grad_out[i];
  });
}

Tensor row(const Tensor& x, std::size_t i) {
  require_rank(x, 2, "row");
  return reshape(slice_rows(x, i, i + 1), {x.dim(1)});
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  require_rank(x, 2, "gather_rows");
  if (rows.empty()) throw ShapeError("gather_rows: empty index list");
  const std::size_t w = x.dim(1);
  auto xd = x.data();
  std::vector<double> out;
  out.reserve(rows.size() * w);
  for (auto r : rows) {
    if (r >= x.dim(0)) throw ShapeError("gather_rows: row " + std::to_string(r) + " out of range");
    out.insert(out.end(), xd.begin() + static_cast<std::ptrdiff_t>(r * w),
               xd.begin() + static_cast<std::ptrdiff_t>((r + 1) * w));
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return record_op({rows.size(), w}, std::move(out), {x}, [x, idx, w](const BackwardArgs& args) {
    auto g = grad_sink(x);
    if (g.empty()) return;
    for (std::size_t k = 0; k < idx.size(); ++k)
      for (std::size_t c = 0; c < w; ++c) g[idx[k] * w + c] += args.grad_out[k * w + c];
  });
}

Tensor gather(const Tensor& table, std::span<const std::int64_t> index, Shape out_shape) {
  require_rank(table, 1, "gather");
  if (shape_numel(out_shape) != index.size()) {
    throw ShapeError("gather: " + std::to_string(index.size()) + " indices do not fill shape " +
                     shape_str(out_shape));
  }
  auto td = table.data();
  std::vector<double> out(index.size(), 0.0);
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] < 0) continue;
    if (static_cast<std::size_t>(index[k]) >= td.size()) {
      throw ShapeError("gather: index " + std::to_string(index[k]) + " out of range for table of " +
                       std::to_string(td.size()));
    }
    out[k] = td[static_cast<std::size_t>(index[k])];
  }
  std::vector<std::int64_t> idx(index.begin(), index.end());
  return record_op(std::move(out_shape), std::move(out), {table}, [table, idx](const BackwardArgs& args) {
    auto g = grad_sink(table);
    if (g.empty()) return;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (idx[k] >= 0) g[static_cast<std::size_t>(idx[k])] += args.grad_out[k];
    }
  });
}

Tensor mean_rows(const Tensor& x) {
  require_rank(x, 2, "mean_rows");
  const std::size_t n = x.dim(0), w = x.dim(1);
  auto xd = x.data();
  std::vector<double> out(w, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < w; ++c) out[c] += xd[i * w + c];
  for (auto& v : out) v /= static_cast<double>(n);
  return record_op({w}, std::move(out), {x}, [x, n, w](const BackwardArgs& args) {
    auto g = grad_sink(x);
    if (g.empty()) return;
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < w; ++c) g[i * w + c] += args.grad_out[c] * inv;
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return record_op({1}, {s}, {x}, [x](const BackwardArgs& args) {
    auto g = grad_sink(x);
    for (auto& v : g) v += args.grad_out[0];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return record_op(std::move(shape), std::move(out), {x}, [x](const BackwardArgs& args) {
    auto g = grad_sink(x);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += args.grad_out[i];
  });
}

}  // namespace ops
}  // namespace livlr
