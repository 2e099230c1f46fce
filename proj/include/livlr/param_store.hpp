// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "livlr/tensor.hpp"

namespace livlr {

// Named trainable leaves plus their AdamW moments. Iteration follows the
// lexicographic order of names.
class ParamStore {
 public:
  struct Entry {
    Tensor value;
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::int64_t step = 0;
  };

  // Registers `value` under `name` and marks it as requiring a gradient.
  Tensor& add(const std::string& name, Tensor value);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  Entry& entry(const std::string& name);

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  std::vector<std::string> names() const;

  void zero_grad();

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::map<std::string, Entry> entries_;
};

enum class Init {
  kUniformFanIn,  // U(-1/sqrt(fan_in), 1/sqrt(fan_in)), fan_in = shape[0]
  kZeros,
  kOnes,
};

struct ParamSpec {
  std::string name;
  Shape shape;
  Init init = Init::kUniformFanIn;
};

// Creates every spec'd parameter. Each tensor draws from its own generator
// seeded by (seed, name), so values do not depend on declaration order.
void materialize(ParamStore& store, const std::vector<ParamSpec>& specs, std::uint64_t seed);

struct AdamWOptions {
  double lr = 8e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled weight decay: theta -= lr * wd * theta, then the bias-corrected
// Adam step theta -= lr * m_hat / (sqrt(v_hat) + eps).
void adamw_step(ParamStore& params, const AdamWOptions& opt);

}  // namespace livlr
