// SPDX-License-Identifier: Apache-2.0
//
// Question-conditioned integration of the four representation matrices
// (holistic/fine-grained x visual/linguistic) into one joint vector, plus
// the concatenation, co-attention and plain-GCN baselines.

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "livlr/config.hpp"
#include "livlr/graph.hpp"
#include "livlr/param_store.hpp"
#include "livlr/tensor.hpp"

namespace livlr::davl {

inline constexpr std::size_t kSourceCount = 4;

// Source ids as used by the index embedding (1-based).
enum Source : std::size_t {
  kHolisticVisual = 1,
  kFineVisual = 2,
  kHolisticLinguistic = 3,
  kFineLinguistic = 4,
};

struct AttentionHead {
  Tensor Wq;  // [d x d/N_h], applied to the representation rows
  Tensor Wk;  // [d x d/N_h], applied to the question tokens
  Tensor Wv;  // [d x d/N_h], applied to the question tokens
  Tensor Wo;  // optional [d/N_h x d/N_h] output map; undefined when absent
};

struct QuestionAttentionBlock {
  std::vector<AttentionHead> heads;
};

// Per head: softmax over question tokens of (X Wq)(Q Wk)^T / sqrt(d/N_h),
// times Q Wv, then the optional output map; heads are concatenated to
// [m x d].
Tensor question_attention(const QuestionAttentionBlock& block, const Tensor& X, const Tensor& Q);

// Row i is multiplied elementwise by row sources[i] (1-based) of the table.
Tensor apply_index_embedding(const Tensor& index_table, const Tensor& nodes, std::span<const std::size_t> sources);

struct RepresentationBundle {
  Tensor X_Vg;  // [N_f x d]
  Tensor X_Vl;  // [N_f x d]
  Tensor X_Lg;  // [N_s x d]
  Tensor X_Ll;  // [N_s x d]

  std::array<Tensor, kSourceCount> parts() const { return {X_Vg, X_Vl, X_Lg, X_Ll}; }
  std::size_t rows() const;
  // Source id of every stacked row: X_Vg rows, then X_Vl, X_Lg, X_Ll.
  std::vector<std::size_t> sources() const;
};

struct DavlParams {
  std::array<QuestionAttentionBlock, kSourceCount> attention;
  Tensor index_table;            // [4 x d], DAVL only
  std::vector<Tensor> gcn;       // per layer [d x d], DAVL / RI_GCN
  std::vector<Tensor> gcn_Wq;    // attention-GCN variant only
  std::vector<Tensor> gcn_Wk;
  Tensor W1, W2;                 // graph learner, DAVL / RI_GCN
  Tensor concat_W, concat_b;     // RI_CONCAT projection 4d -> d
  std::size_t max_neighbors = 5;
  bool normalize_messages = true;
  bool attention_gcn = false;

  static void declare(const ModelConfig& cfg, std::vector<ParamSpec>& specs, const std::string& prefix = "davl");
  static DavlParams bind(ParamStore& store, const ModelConfig& cfg, const std::string& prefix = "davl");
};

// Attended node matrix V0, [(2N_f + 2N_s) x d].
Tensor attend_sources(const DavlParams& p, const RepresentationBundle& bundle, const Tensor& Q);

// Joint representation, [d].
Tensor integrate(const DavlParams& p, const RepresentationBundle& bundle, const Tensor& Q, RiVariant variant);

}  // namespace livlr::davl
