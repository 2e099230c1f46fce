// SPDX-License-Identifier: Apache-2.0
#include "livlr/linguistic.hpp"

#include <fstream>

#include "livlr/errors.hpp"
#include "livlr/ops.hpp"

namespace livlr::linguistic {
namespace {

void check_span(const Span& s, std::size_t n_tokens, const std::string& what) {
  if (s.lo >= s.hi || s.hi > n_tokens) {
    throw IntegrityError(what + " span [" + std::to_string(s.lo) + "," + std::to_string(s.hi) +
                         ") is empty or exceeds " + std::to_string(n_tokens) + " tokens");
  }
}

Span span_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw DataError("span must be a [lo, hi] pair");
  return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

}  // namespace

void SrlParse::validate(std::size_t n_roles) const {
  if (n_tokens == 0) throw IntegrityError("parse covers no tokens");
  for (std::size_t p = 0; p < predicates.size(); ++p) check_span(predicates[p], n_tokens, "predicate");
  for (std::size_t a = 0; a < arguments.size(); ++a) {
    const auto& arg = arguments[a];
    check_span(arg.span, n_tokens, "argument");
    if (arg.predicate >= predicates.size()) {
      throw IntegrityError("argument " + std::to_string(a) + " refers to missing predicate " +
                           std::to_string(arg.predicate));
    }
    if (arg.role <= kPredicateRole || arg.role > static_cast<int>(n_roles)) {
      throw IntegrityError("argument " + std::to_string(a) + " has role " + std::to_string(arg.role) +
                           " outside 2.." + std::to_string(n_roles));
    }
  }
}

nlohmann::json to_json(const SrlParse& parse) {
  nlohmann::json preds = nlohmann::json::array();
  for (const auto& s : parse.predicates) preds.push_back({s.lo, s.hi});
  nlohmann::json args = nlohmann::json::array();
  for (const auto& a : parse.arguments) {
    args.push_back({{"span", {a.span.lo, a.span.hi}}, {"role", a.role}, {"pred", a.predicate}});
  }
  return {{"tokens", parse.n_tokens}, {"predicates", preds}, {"arguments", args}};
}

SrlParse parse_from_json(const nlohmann::json& j) {
  SrlParse p;
  try {
    p.n_tokens = j.at("tokens").get<std::size_t>();
    for (const auto& s : j.at("predicates")) p.predicates.push_back(span_from_json(s));
    for (const auto& a : j.at("arguments")) {
      SrlArgument arg;
      arg.span = span_from_json(a.at("span"));
      arg.role = a.at("role").get<int>();
      arg.predicate = a.at("pred").get<std::size_t>();
      p.arguments.push_back(arg);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed SRL parse: ") + e.what());
  }
  return p;
}

std::vector<SrlParse> read_srl_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::vector<SrlParse> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(out.size() + 1) + " of '" + path + "': " + e.what());
    }
  }
  return out;
}

void write_srl_jsonl(const std::vector<SrlParse>& parses, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  for (const auto& p : parses) out << to_json(p).dump() << '\n';
}

RoleGraph build_role_graph(const SrlParse& parse) {
  for (std::size_t a = 0; a < parse.arguments.size(); ++a) {
    if (parse.arguments[a].predicate >= parse.predicates.size()) {
      throw IntegrityError("orphan argument " + std::to_string(a));
    }
  }
  RoleGraph rg;
  const std::size_t n = parse.node_count();
  rg.graph = graph::DenseGraph::empty(n);
  rg.roles.assign(n, 0);
  rg.spans.assign(n, Span{});
  rg.action_count = parse.predicates.size();
  for (std::size_t p = 0; p < parse.predicates.size(); ++p) {
    const std::size_t node = 1 + p;
    rg.roles[node] = kPredicateRole;
    rg.spans[node] = parse.predicates[p];
    rg.graph.add_edge(0, node);
    rg.graph.add_edge(node, 0);
  }
  for (std::size_t a = 0; a < parse.arguments.size(); ++a) {
    const auto& arg = parse.arguments[a];
    const std::size_t node = 1 + parse.predicates.size() + a;
    const std::size_t parent = 1 + arg.predicate;
    rg.roles[node] = arg.role;
    rg.spans[node] = arg.span;
    rg.graph.add_edge(node, parent);
    rg.graph.add_edge(parent, node);
  }
  return rg;
}

void LinguisticEncoderParams::declare(const ModelConfig& cfg, std::vector<ParamSpec>& specs,
                                      const std::string& prefix) {
  specs.push_back({prefix + ".token.W", {cfg.d_t, cfg.d}});
  specs.push_back({prefix + ".token.b", {cfg.d}, Init::kZeros});
  nn::declare_bilstm(specs, prefix + ".lstm", cfg.d, cfg.d / 2);
  specs.push_back({prefix + ".sr_init.W", {cfg.d_t, cfg.d}});
  for (std::size_t l = 0; l < cfg.gcn_layers; ++l) {
    const std::string layer = prefix + ".gcn.l" + std::to_string(l);
    specs.push_back({layer + ".role", {cfg.N_r, cfg.d}, Init::kOnes});
    specs.push_back({layer + ".W", {cfg.d, cfg.d}});
    specs.push_back({layer + ".Wq", {cfg.d, cfg.d}});
    specs.push_back({layer + ".Wk", {cfg.d, cfg.d}});
  }
}

LinguisticEncoderParams LinguisticEncoderParams::bind(ParamStore& s, const ModelConfig& cfg,
                                                      const std::string& prefix) {
  LinguisticEncoderParams p;
  p.W_tok = s.get(prefix + ".token.W");
  p.b_tok = s.get(prefix + ".token.b");
  p.lstm = nn::bind_bilstm(s, prefix + ".lstm");
  p.W_sr0 = s.get(prefix + ".sr_init.W");
  p.n_roles = cfg.N_r;
  for (std::size_t l = 0; l < cfg.gcn_layers; ++l) {
    const std::string layer = prefix + ".gcn.l" + std::to_string(l);
    p.role_tables.push_back(s.get(layer + ".role"));
    p.layers.push_back({s.get(layer + ".W"), s.get(layer + ".Wq"), s.get(layer + ".Wk")});
  }
  return p;
}

Tensor sentence_embedding(const LinguisticEncoderParams& p, const SentenceFeatures& sent) {
  if (sent.tokens.rank() != 2) throw ShapeError("sentence tokens must be [N_t x d_t]");
  return nn::bilstm_summary(p.lstm, nn::affine(sent.tokens, p.W_tok, p.b_tok));
}

std::pair<Tensor, Tensor> encode_sentence(const LinguisticEncoderParams& p, const SentenceFeatures& sent,
                                          const SrlParse& parse) {
  const std::size_t n_tokens = sent.tokens.dim(0);
  if (parse.n_tokens != n_tokens) {
    throw DataError("parse covers " + std::to_string(parse.n_tokens) + " tokens but the sentence has " +
                    std::to_string(n_tokens));
  }
  parse.validate(p.n_roles);
  const auto rg = build_role_graph(parse);
  const std::size_t locals = rg.local_count();
  auto event = sentence_embedding(p, sent);
  const std::size_t d = event.dim(0);

  if (locals == 0) {
    auto nodes = ops::reshape(event, {1, d});
    for (const auto& layer : p.layers) nodes = graph::attn_gcn_layer(layer, nodes, rg.graph);
    return {ops::reshape(nodes, {d}), Tensor::zeros({d})};
  }

  // Span means of the raw token features, then the shared projection.
  std::vector<double> averaging(locals * n_tokens, 0.0);
  std::vector<std::size_t> role_rows(locals);
  for (std::size_t k = 0; k < locals; ++k) {
    const auto& span = rg.spans[k + 1];
    for (std::size_t t = span.lo; t < span.hi; ++t) averaging[k * n_tokens + t] = 1.0 / static_cast<double>(span.length());
    role_rows[k] = static_cast<std::size_t>(rg.roles[k + 1] - 1);
  }
  auto local = ops::matmul(ops::matmul(Tensor::matrix(locals, n_tokens, std::move(averaging)), sent.tokens), p.W_sr0);

  Tensor nodes;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto modulated = ops::mul(local, ops::gather_rows(p.role_tables[l], role_rows));
    nodes = graph::attn_gcn_layer(p.layers[l], ops::stack_rows({event, modulated}), rg.graph);
    event = ops::row(nodes, 0);
    local = ops::slice_rows(nodes, 1, 1 + locals);
  }
  return {event, ops::mean_rows(local)};
}

std::pair<Tensor, Tensor> encode_all(const LinguisticEncoderParams& p, const std::vector<Sentence>& sentences) {
  if (sentences.empty()) throw DataError("at least one description sentence is required");
  std::vector<Tensor> holistic, local;
  for (const auto& s : sentences) {
    auto [event, pooled] = encode_sentence(p, s.features, s.parse);
    holistic.push_back(std::move(event));
    local.push_back(std::move(pooled));
  }
  return {ops::stack_rows(holistic), ops::stack_rows(local)};
}

}  // namespace livlr::linguistic
