// SPDX-License-Identifier: Apache-2.0
//
// Question encoder, answer heads and their losses.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "livlr/config.hpp"
#include "livlr/nn.hpp"
#include "livlr/param_store.hpp"
#include "livlr/tensor.hpp"

namespace livlr::heads {

// ReLU token projection followed by a BiLSTM with d/2 hidden units per
// direction. Also used, with its own parameters, for multiple-choice
// candidates.
struct QuestionEncoderParams {
  Tensor W_proj;  // [d_t x d]
  Tensor b_proj;  // [d]
  nn::BiLstmParams lstm;

  static void declare(const ModelConfig& cfg, std::vector<ParamSpec>& specs, const std::string& prefix = "question");
  static QuestionEncoderParams bind(ParamStore& store, const std::string& prefix = "question");
};

struct EncodedQuestion {
  Tensor tokens;   // Q, [N_t x d]
  Tensor summary;  // [d]
};

EncodedQuestion encode_question(const QuestionEncoderParams& p, const Tensor& tokens);

struct OpenEndedHead {
  Tensor W1, b1;  // [2d x hidden], [hidden]
  Tensor W2, b2;  // [hidden x |A|], [|A|]

  static void declare(const ModelConfig& cfg, std::vector<ParamSpec>& specs, const std::string& prefix = "head.oe");
  static OpenEndedHead bind(ParamStore& store, const std::string& prefix = "head.oe");
};

// affine2(ReLU(affine1([joint ; question]))), [|A|].
Tensor predict_open_ended(const OpenEndedHead& head, const Tensor& joint, const Tensor& question);

// -log softmax(logits)[label]; ContractError when label >= |A|.
Tensor cross_entropy(const Tensor& logits, std::size_t label);

struct MultiChoiceHead {
  QuestionEncoderParams candidate;  // separate weights, same shape as the question encoder
  Tensor W, b;                      // [3d x 1], [1]

  static void declare(const ModelConfig& cfg, std::vector<ParamSpec>& specs, const std::string& prefix = "head.mc");
  static MultiChoiceHead bind(ParamStore& store, const std::string& prefix = "head.mc");
};

// s_k = affine([joint ; question ; candidate_k summary]), [N_k].
Tensor predict_multichoice(const MultiChoiceHead& head, const Tensor& joint, const Tensor& question,
                           const std::vector<Tensor>& candidates);

// sum over t != correct of max(0, 1 - (s_correct - s_t)).
Tensor hinge_loss(const Tensor& scores, std::size_t correct);

// Index of the largest entry; the lowest index wins ties.
std::size_t argmax(const Tensor& scores);

}  // namespace livlr::heads
