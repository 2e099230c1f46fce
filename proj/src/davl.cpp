// SPDX-License-Identifier: Apache-2.0
#include "livlr/davl.hpp"

#include <cmath>

#include "livlr/errors.hpp"
#include "livlr/nn.hpp"
#include "livlr/ops.hpp"

namespace livlr::davl {
namespace {

constexpr std::array<const char*, kSourceCount> kSourceNames = {"vg", "vl", "lg", "ll"};

bool uses_learned_graph(RiVariant v) { return v == RiVariant::kDavl || v == RiVariant::kRiGcn; }

Tensor graph_integration(const DavlParams& p, Tensor nodes) {
  // The neighbourhood is learned once from the layer-0 embeddings.
  const auto learned = graph::learn_adjacency(p.W1, p.W2, nodes, p.max_neighbors);
  for (std::size_t l = 0; l < p.gcn.size(); ++l) {
    if (p.attention_gcn) {
      nodes = graph::attn_gcn_layer({p.gcn[l], p.gcn_Wq[l], p.gcn_Wk[l]}, nodes, learned.graph);
    } else {
      nodes = graph::vanilla_gcn_layer(p.gcn[l], nodes, learned.graph, p.normalize_messages);
    }
  }
  return graph::mean_pool(nodes);
}

// Parameter-free co-attention: every node attends to every other node.
Tensor co_attention(const Tensor& nodes) {
  const std::size_t m = nodes.dim(0), d = nodes.dim(1);
  Mask others(m, m, true);
  for (std::size_t i = 0; i < m; ++i) others.set(i, i, false);
  auto scores = ops::scale(ops::matmul(nodes, ops::transpose(nodes)), 1.0 / std::sqrt(static_cast<double>(d)));
  auto weights = ops::row_softmax(scores, &others, ops::EmptyRow::kZero);
  return graph::mean_pool(ops::add(nodes, ops::matmul(weights, nodes)));
}

}  // namespace

Tensor question_attention(const QuestionAttentionBlock& block, const Tensor& X, const Tensor& Q) {
  if (X.rank() != 2 || Q.rank() != 2 || X.dim(1) != Q.dim(1)) {
    throw ShapeError("question_attention: X " + shape_str(X.shape()) + " and Q " + shape_str(Q.shape()) +
                     " must be [m x d] and [N_t x d]");
  }
  if (block.heads.empty()) throw ShapeError("question_attention: no heads");
  const std::size_t d = X.dim(1);
  const std::size_t head_dim = block.heads.front().Wq.dim(1);
  if (head_dim * block.heads.size() != d) {
    throw ShapeError("question_attention: " + std::to_string(block.heads.size()) + " heads of width " +
                     std::to_string(head_dim) + " do not tile d=" + std::to_string(d));
  }
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<Tensor> outputs;
  outputs.reserve(block.heads.size());
  for (const auto& h : block.heads) {
    auto scores = ops::scale(ops::matmul(ops::matmul(X, h.Wq), ops::transpose(ops::matmul(Q, h.Wk))), inv_scale);
    auto out = ops::matmul(ops::row_softmax(scores), ops::matmul(Q, h.Wv));
    if (h.Wo.defined()) out = ops::matmul(out, h.Wo);
    outputs.push_back(std::move(out));
  }
  return outputs.size() == 1 ? outputs.front() : ops::concat(outputs);
}

Tensor apply_index_embedding(const Tensor& index_table, const Tensor& nodes, std::span<const std::size_t> sources) {
  if (index_table.rank() != 2 || index_table.dim(0) != kSourceCount || nodes.rank() != 2 ||
      index_table.dim(1) != nodes.dim(1) || sources.size() != nodes.dim(0)) {
    throw ShapeError("apply_index_embedding: table " + shape_str(index_table.shape()) + ", nodes " +
                     shape_str(nodes.shape()) + ", " + std::to_string(sources.size()) + " source ids");
  }
  std::vector<std::size_t> rows(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (sources[i] < 1 || sources[i] > kSourceCount) {
      throw ContractError("source id " + std::to_string(sources[i]) + " outside 1..4");
    }
    rows[i] = sources[i] - 1;
  }
  return ops::mul(nodes, ops::gather_rows(index_table, rows));
}

std::size_t RepresentationBundle::rows() const {
  std::size_t n = 0;
  for (const auto& x : parts()) n += x.dim(0);
  return n;
}

std::vector<std::size_t> RepresentationBundle::sources() const {
  std::vector<std::size_t> out;
  const auto ps = parts();
  for (std::size_t s = 0; s < kSourceCount; ++s) out.insert(out.end(), ps[s].dim(0), s + 1);
  return out;
}

void DavlParams::declare(const ModelConfig& cfg, std::vector<ParamSpec>& specs, const std::string& prefix) {
  const std::size_t d = cfg.d, hd = cfg.d / cfg.N_h;
  for (std::size_t s = 0; s < kSourceCount; ++s) {
    for (std::size_t h = 0; h < cfg.N_h; ++h) {
      const std::string head = prefix + ".att." + kSourceNames[s] + ".h" + std::to_string(h);
      specs.push_back({head + ".Wq", {d, hd}});
      specs.push_back({head + ".Wk", {d, hd}});
      specs.push_back({head + ".Wv", {d, hd}});
      if (cfg.head_output_map) specs.push_back({head + ".Wo", {hd, hd}});
    }
  }
  switch (cfg.ri_variant) {
    case RiVariant::kDavl:
      specs.push_back({prefix + ".index", {kSourceCount, d}, Init::kOnes});
      [[fallthrough]];
    case RiVariant::kRiGcn:
      specs.push_back({prefix + ".learner.W1", {d, d}});
      specs.push_back({prefix + ".learner.W2", {d, d}});
      for (std::size_t l = 0; l < cfg.gcn_layers; ++l) {
        const std::string layer = prefix + ".gcn.l" + std::to_string(l);
        specs.push_back({layer + ".W", {d, d}});
        if (cfg.davl_attention_gcn) {
          specs.push_back({layer + ".Wq", {d, d}});
          specs.push_back({layer + ".Wk", {d, d}});
        }
      }
      break;
    case RiVariant::kRiAt:
      break;
    case RiVariant::kRiConcat:
      specs.push_back({prefix + ".concat.W", {kSourceCount * d, d}});
      specs.push_back({prefix + ".concat.b", {d}, Init::kZeros});
      break;
  }
}

DavlParams DavlParams::bind(ParamStore& s, const ModelConfig& cfg, const std::string& prefix) {
  DavlParams p;
  for (std::size_t src = 0; src < kSourceCount; ++src) {
    for (std::size_t h = 0; h < cfg.N_h; ++h) {
      const std::string head = prefix + ".att." + kSourceNames[src] + ".h" + std::to_string(h);
      AttentionHead ah{s.get(head + ".Wq"), s.get(head + ".Wk"), s.get(head + ".Wv"), Tensor{}};
      if (cfg.head_output_map) ah.Wo = s.get(head + ".Wo");
      p.attention[src].heads.push_back(std::move(ah));
    }
  }
  p.max_neighbors = cfg.N_n;
  p.normalize_messages = cfg.davl_normalize_messages;
  p.attention_gcn = cfg.davl_attention_gcn;
  if (s.contains(prefix + ".index")) p.index_table = s.get(prefix + ".index");
  if (s.contains(prefix + ".learner.W1")) {
    p.W1 = s.get(prefix + ".learner.W1");
    p.W2 = s.get(prefix + ".learner.W2");
    for (std::size_t l = 0; l < cfg.gcn_layers; ++l) {
      const std::string layer = prefix + ".gcn.l" + std::to_string(l);
      p.gcn.push_back(s.get(layer + ".W"));
      if (cfg.davl_attention_gcn) {
        p.gcn_Wq.push_back(s.get(layer + ".Wq"));
        p.gcn_Wk.push_back(s.get(layer + ".Wk"));
      }
    }
  }
  if (s.contains(prefix + ".concat.W")) {
    p.concat_W = s.get(prefix + ".concat.W");
    p.concat_b = s.get(prefix + ".concat.b");
  }
  return p;
}

Tensor attend_sources(const DavlParams& p, const RepresentationBundle& bundle, const Tensor& Q) {
  const auto parts = bundle.parts();
  std::vector<Tensor> attended;
  for (std::size_t s = 0; s < kSourceCount; ++s) attended.push_back(question_attention(p.attention[s], parts[s], Q));
  return ops::stack_rows(attended);
}

Tensor integrate(const DavlParams& p, const RepresentationBundle& bundle, const Tensor& Q, RiVariant variant) {
  if (uses_learned_graph(variant) && (!p.W1.defined() || p.gcn.empty())) {
    throw ConfigError("integration variant " + to_string(variant) + " needs graph parameters that are not bound");
  }
  switch (variant) {
    case RiVariant::kDavl: {
      if (!p.index_table.defined()) throw ConfigError("DAVL needs the index embedding table");
      const auto sources = bundle.sources();
      return graph_integration(p, apply_index_embedding(p.index_table, attend_sources(p, bundle, Q), sources));
    }
    case RiVariant::kRiGcn:
      return graph_integration(p, attend_sources(p, bundle, Q));
    case RiVariant::kRiAt:
      return co_attention(attend_sources(p, bundle, Q));
    case RiVariant::kRiConcat: {
      if (!p.concat_W.defined()) throw ConfigError("RI_CONCAT needs its projection parameters");
      const auto parts = bundle.parts();
      std::vector<Tensor> pooled;
      for (std::size_t s = 0; s < kSourceCount; ++s) {
        pooled.push_back(graph::mean_pool(question_attention(p.attention[s], parts[s], Q)));
      }
      return nn::affine(ops::concat(pooled), p.concat_W, p.concat_b);
    }
  }
  throw ConfigError("unknown integration variant");
}

}  // namespace livlr::davl
