// SPDX-License-Identifier: Apache-2.0
//
// Linguistic encoder over semantic-role graphs: one event node per sentence,
// an action node per predicate and an entity node per argument.

#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "livlr/config.hpp"
#include "livlr/graph.hpp"
#include "livlr/nn.hpp"
#include "livlr/param_store.hpp"
#include "livlr/tensor.hpp"

namespace livlr::linguistic {

// Role id reserved for predicate (action) nodes. Argument roles use
// 2..N_r.
inline constexpr int kPredicateRole = 1;

// Half-open token range [lo, hi).
struct Span {
  std::size_t lo = 0;
  std::size_t hi = 0;

  std::size_t length() const { return hi - lo; }
  bool operator==(const Span&) const = default;
};

struct SrlArgument {
  Span span;
  int role = 2;
  std::size_t predicate = 0;  // index into SrlParse::predicates

  bool operator==(const SrlArgument&) const = default;
};

struct SrlParse {
  std::size_t n_tokens = 0;
  std::vector<Span> predicates;
  std::vector<SrlArgument> arguments;

  // Spans inside [0, n_tokens), parents exist, roles in 2..n_roles.
  // Violations raise IntegrityError.
  void validate(std::size_t n_roles) const;
  std::size_t node_count() const { return 1 + predicates.size() + arguments.size(); }

  bool operator==(const SrlParse&) const = default;
};

// {"tokens": n, "predicates": [[lo, hi], ...],
//  "arguments": [{"span": [lo, hi], "role": r, "pred": p}, ...]}
nlohmann::json to_json(const SrlParse& parse);
SrlParse parse_from_json(const nlohmann::json& j);
// One parse object per line.
std::vector<SrlParse> read_srl_jsonl(const std::string& path);
void write_srl_jsonl(const std::vector<SrlParse>& parses, const std::string& path);

struct SentenceFeatures {
  Tensor tokens;  // [N_t x d_t]
};

struct Sentence {
  SentenceFeatures features;
  SrlParse parse;
};

// Node 0 is the event; 1..P are actions; the remaining nodes are entities in
// argument order. Edges are symmetric: event-action and action-entity.
struct RoleGraph {
  graph::DenseGraph graph;
  std::vector<int> roles;  // per node; 0 for the event node
  std::vector<Span> spans;  // per node; unused for the event node
  std::size_t action_count = 0;

  std::size_t local_count() const { return graph.n_nodes - 1; }
};

RoleGraph build_role_graph(const SrlParse& parse);

struct LinguisticEncoderParams {
  Tensor W_tok, b_tok;  // token projection feeding the BiLSTM
  nn::BiLstmParams lstm;
  Tensor W_sr0;                      // [d_t x d] local node initialisation
  std::vector<Tensor> role_tables;   // one [N_r x d] per GCN layer
  std::vector<graph::AttnGcnLayer> layers;
  std::size_t n_roles = 16;

  static void declare(const ModelConfig& cfg, std::vector<ParamSpec>& specs, const std::string& prefix = "linguistic");
  static LinguisticEncoderParams bind(ParamStore& store, const ModelConfig& cfg,
                                      const std::string& prefix = "linguistic");
};

// Projected tokens through a BiLSTM; [d].
Tensor sentence_embedding(const LinguisticEncoderParams& p, const SentenceFeatures& sent);

// (event node, mean over action and entity nodes); the local part is the
// zero vector when the parse has no predicates.
std::pair<Tensor, Tensor> encode_sentence(const LinguisticEncoderParams& p, const SentenceFeatures& sent,
                                          const SrlParse& parse);

// (X_Lg, X_Ll), both [N_s x d].
std::pair<Tensor, Tensor> encode_all(const LinguisticEncoderParams& p, const std::vector<Sentence>& sentences);

}  // namespace livlr::linguistic
