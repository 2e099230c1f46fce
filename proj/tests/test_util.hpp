// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "livlr/checks.hpp"
#include "livlr/ops.hpp"
#include "livlr/param_store.hpp"
#include "livlr/tensor.hpp"

namespace testutil {

inline livlr::Tensor random_tensor(std::mt19937_64& rng, livlr::Shape shape, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(livlr::shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return livlr::Tensor::from_data(std::move(shape), std::move(v));
}

// Projects an arbitrary tensor onto a scalar with fixed random weights so
// that every output element contributes a distinct gradient.
inline livlr::Tensor project(const livlr::Tensor& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  auto w = random_tensor(rng, y.shape());
  return livlr::ops::sum(livlr::ops::mul(y, w));
}

// Finite-difference check of `fn` with respect to the tensors in `store`,
// run in double precision. Returns the worst relative error.
inline double fd_worst(livlr::ParamStore& store, const std::function<livlr::Tensor()>& fn) {
  livlr::PrecisionScope scope(livlr::Precision::kDouble);
  const auto report = livlr::check_gradients(store, [&] { return project(fn()); });
  return report.worst() ? report.worst()->max_rel_error : 0.0;
}

}  // namespace testutil
