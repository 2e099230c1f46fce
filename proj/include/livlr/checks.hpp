// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference gradient checking and parameter accounting.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "livlr/config.hpp"
#include "livlr/param_store.hpp"
#include "livlr/tensor.hpp"

namespace livlr {

struct TensorGradCheck {
  std::string name;
  std::size_t numel = 0;
  double max_abs_error = 0.0;
  // max |analytic - numeric| / max(max |analytic|, max |numeric|, 1e-6),
  // over the tensor's elements.
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<TensorGradCheck> tensors;
  double tolerance = 0.0;
  double wall_ms = 0.0;

  bool passed() const;
  const TensorGradCheck* worst() const;
};

// Compares the tape's gradients of `loss_fn` with central differences of
// step `h` for every element of every tensor in `params`.
GradCheckReport check_gradients(ParamStore& params, const std::function<Tensor()>& loss_fn, double h = 1e-5,
                                double tolerance = 1e-4);

// Builds the model described by `cfg` in double precision, draws a random
// two-sample batch from `seed` and checks every parameter tensor.
GradCheckReport grad_check(const ModelConfig& cfg, std::uint64_t seed, double h = 1e-5, double tolerance = 1e-4);

struct ParamCount {
  std::map<std::string, std::size_t> by_module;  // first component of the parameter name
  std::size_t total = 0;
};

ParamCount count_params(const std::vector<ParamSpec>& specs);
ParamCount param_count(const ModelConfig& cfg);

}  // namespace livlr
