// SPDX-License-Identifier: Apache-2.0
#include "livlr/heads.hpp"

#include <algorithm>
#include <cmath>

#include "livlr/errors.hpp"
#include "livlr/ops.hpp"

namespace livlr::heads {
namespace {

void require_vector(const Tensor& t, const char* what) {
  if (t.rank() != 1) throw ShapeError(std::string(what) + " must be rank 1, got " + shape_str(t.shape()));
}

}  // namespace

void QuestionEncoderParams::declare(const ModelConfig& cfg, std::vector<ParamSpec>& specs,
                                    const std::string& prefix) {
  specs.push_back({prefix + ".proj.W", {cfg.d_t, cfg.d}});
  specs.push_back({prefix + ".proj.b", {cfg.d}, Init::kZeros});
  nn::declare_bilstm(specs, prefix + ".lstm", cfg.d, cfg.d / 2);
}

QuestionEncoderParams QuestionEncoderParams::bind(ParamStore& s, const std::string& prefix) {
  return {s.get(prefix + ".proj.W"), s.get(prefix + ".proj.b"), nn::bind_bilstm(s, prefix + ".lstm")};
}

EncodedQuestion encode_question(const QuestionEncoderParams& p, const Tensor& tokens) {
  if (tokens.rank() != 2 || tokens.dim(0) == 0) {
    throw ShapeError("question tokens must be a non-empty [N_t x d_t] matrix, got " + shape_str(tokens.shape()));
  }
  auto Q = ops::relu(nn::affine(tokens, p.W_proj, p.b_proj));
  auto summary = nn::bilstm_summary(p.lstm, Q);
  return {std::move(Q), std::move(summary)};
}

void OpenEndedHead::declare(const ModelConfig& cfg, std::vector<ParamSpec>& specs, const std::string& prefix) {
  specs.push_back({prefix + ".fc1.W", {2 * cfg.d, cfg.classifier_hidden}});
  specs.push_back({prefix + ".fc1.b", {cfg.classifier_hidden}, Init::kZeros});
  specs.push_back({prefix + ".fc2.W", {cfg.classifier_hidden, cfg.answer_set_size}});
  specs.push_back({prefix + ".fc2.b", {cfg.answer_set_size}, Init::kZeros});
}

OpenEndedHead OpenEndedHead::bind(ParamStore& s, const std::string& prefix) {
  return {s.get(prefix + ".fc1.W"), s.get(prefix + ".fc1.b"), s.get(prefix + ".fc2.W"), s.get(prefix + ".fc2.b")};
}

Tensor predict_open_ended(const OpenEndedHead& head, const Tensor& joint, const Tensor& question) {
  require_vector(joint, "joint representation");
  require_vector(question, "question summary");
  auto hidden = ops::relu(nn::affine(ops::concat({joint, question}), head.W1, head.b1));
  return nn::affine(hidden, head.W2, head.b2);
}

Tensor cross_entropy(const Tensor& logits, std::size_t label) {
  require_vector(logits, "logits");
  const std::size_t n = logits.dim(0);
  if (label >= n) {
    throw ContractError("label " + std::to_string(label) + " outside an answer set of " + std::to_string(n));
  }
  auto x = logits.data();
  const double mx = *std::max_element(x.begin(), x.end());
  double z = 0.0;
  for (double v : x) z += std::exp(v - mx);
  const double log_z = mx + std::log(z);
  return record_op({1}, {log_z - x[label]}, {logits}, [logits, label, log_z](const BackwardArgs& args) {
    auto g = grad_sink(logits);
    if (g.empty()) return;
    auto x = logits.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double p = std::exp(x[i] - log_z);
      g[i] += args.grad_out[0] * (p - (i == label ? 1.0 : 0.0));
    }
  });
}

void MultiChoiceHead::declare(const ModelConfig& cfg, std::vector<ParamSpec>& specs, const std::string& prefix) {
  QuestionEncoderParams::declare(cfg, specs, prefix + ".cand");
  specs.push_back({prefix + ".score.W", {3 * cfg.d, 1}});
  specs.push_back({prefix + ".score.b", {1}, Init::kZeros});
}

MultiChoiceHead MultiChoiceHead::bind(ParamStore& s, const std::string& prefix) {
  return {QuestionEncoderParams::bind(s, prefix + ".cand"), s.get(prefix + ".score.W"), s.get(prefix + ".score.b")};
}

Tensor predict_multichoice(const MultiChoiceHead& head, const Tensor& joint, const Tensor& question,
                           const std::vector<Tensor>& candidates) {
  require_vector(joint, "joint representation");
  require_vector(question, "question summary");
  if (candidates.size() < 2) {
    throw ContractError("multiple choice needs at least 2 candidates, got " + std::to_string(candidates.size()));
  }
  std::vector<Tensor> rows;
  rows.reserve(candidates.size());
  for (const auto& c : candidates) {
    rows.push_back(ops::concat({joint, question, encode_question(head.candidate, c).summary}));
  }
  auto scores = nn::affine(ops::stack_rows(rows), head.W, head.b);
  return ops::reshape(scores, {candidates.size()});
}

Tensor hinge_loss(const Tensor& scores, std::size_t correct) {
  require_vector(scores, "scores");
  const std::size_t n = scores.dim(0);
  if (correct >= n) {
    throw ContractError("correct index " + std::to_string(correct) + " outside " + std::to_string(n) + " candidates");
  }
  auto s = scores.data();
  double loss = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    if (t != correct) loss += std::max(0.0, 1.0 - (s[correct] - s[t]));
  }
  return record_op({1}, {loss}, {scores}, [scores, correct](const BackwardArgs& args) {
    auto g = grad_sink(scores);
    if (g.empty()) return;
    auto s = scores.data();
    for (std::size_t t = 0; t < g.size(); ++t) {
      if (t == correct || 1.0 - (s[correct] - s[t]) <= 0.0) continue;
      g[t] += args.grad_out[0];
      g[correct] -= args.grad_out[0];
    }
  });
}

std::size_t argmax(const Tensor& scores) {
  auto s = scores.data();
  if (s.empty()) throw ContractError("argmax of an empty tensor");
  return static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
}

}  // namespace livlr::heads
