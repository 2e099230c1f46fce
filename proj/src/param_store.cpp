// SPDX-License-Identifier: Apache-2.0
#include "livlr/param_store.hpp"

#include <cmath>
#include <random>

#include "livlr/errors.hpp"

namespace livlr {

Tensor& ParamStore::add(const std::string& name, Tensor value) {
  if (name.empty()) throw ContractError("parameter name must not be empty");
  if (entries_.count(name)) throw ContractError("duplicate parameter name '" + name + "'");
  if (!value.is_leaf()) throw ContractError("parameter '" + name + "' must be a leaf tensor");
  value.set_requires_grad(true);
  Entry e;
  e.first_moment.assign(value.numel(), 0.0);
  e.second_moment.assign(value.numel(), 0.0);
  e.value = std::move(value);
  return entries_.emplace(name, std::move(e)).first->second.value;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second.value;
}

Tensor& ParamStore::get(const std::string& name) { return entry(name).value; }

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) n += e.value.numel();
  return n;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, e] : entries_) out.push_back(name);
  return out;
}

void ParamStore::zero_grad() {
  for (auto& [name, e] : entries_) e.value.zero_grad();
}

namespace {

std::uint32_t fnv1a(const std::string& s) {
  std::uint32_t h = 2166136261u;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 16777619u;
  }
  return h;
}

}  // namespace

void materialize(ParamStore& store, const std::vector<ParamSpec>& specs, std::uint64_t seed) {
  for (const auto& spec : specs) {
    const std::size_t n = shape_numel(spec.shape);
    std::vector<double> values(n, 0.0);
    switch (spec.init) {
      case Init::kZeros: break;
      case Init::kOnes: std::fill(values.begin(), values.end(), 1.0); break;
      case Init::kUniformFanIn: {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), fnv1a(spec.name)};
        std::mt19937_64 rng(seq);
        const double bound = 1.0 / std::sqrt(static_cast<double>(spec.shape.front()));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& v : values) v = round_to_precision(dist(rng));
        break;
      }
    }
    store.add(spec.name, Tensor::from_data(spec.shape, std::move(values)));
  }
}

void adamw_step(ParamStore& params, const AdamWOptions& opt) {
  for (auto& [name, e] : params) {
    if (!e.value.has_grad()) throw ContractError("adamw_step: parameter '" + name + "' has no gradient");
  }
  for (auto& [name, e] : params) {
    auto theta = e.value.mutable_data();
    auto g = e.value.grad();
    e.step += 1;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(e.step));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(e.step));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      double t = theta[i] - opt.lr * opt.weight_decay * theta[i];
      e.first_moment[i] = opt.beta1 * e.first_moment[i] + (1.0 - opt.beta1) * g[i];
      e.second_moment[i] = opt.beta2 * e.second_moment[i] + (1.0 - opt.beta2) * g[i] * g[i];
      const double m_hat = e.first_moment[i] / bc1;
      const double v_hat = e.second_moment[i] / bc2;
      t -= opt.lr * m_hat / (std::sqrt(v_hat) + opt.eps);
      theta[i] = round_to_precision(t);
    }
  }
}

}  // namespace livlr
