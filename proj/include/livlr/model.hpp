// SPDX-License-Identifier: Apache-2.0
//
// The full question-answering network: visual and linguistic encoders, the
// question encoder, representation integration and one answer head.

#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "livlr/config.hpp"
#include "livlr/data.hpp"
#include "livlr/davl.hpp"
#include "livlr/heads.hpp"
#include "livlr/linguistic.hpp"
#include "livlr/param_store.hpp"
#include "livlr/visual.hpp"

namespace livlr {

// Every trainable tensor of a model built from `cfg`.
std::vector<ParamSpec> param_specs(const ModelConfig& cfg);

struct ForwardResult {
  Tensor scores;  // logits over the answer set (OE) or candidate scores (MC)
  Tensor loss;    // scalar
  std::size_t prediction = 0;
};

class LivlrModel {
 public:
  // Validates `cfg` and initialises parameters from cfg.seed.
  explicit LivlrModel(const ModelConfig& cfg);

  LivlrModel(const LivlrModel&) = delete;
  LivlrModel& operator=(const LivlrModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  // Runs under the configured precision and records on the current tape
  // unless gradients are disabled.
  ForwardResult forward(const data::Sample& sample) const;

  // Joint representation only, [d].
  Tensor joint_representation(const data::Sample& sample, RiVariant variant) const;

 private:
  void bind();
  // (joint representation, question summary)
  std::pair<Tensor, Tensor> encode(const data::Sample& sample, RiVariant variant) const;

  ModelConfig cfg_;
  ParamStore store_;
  visual::VisualEncoderParams visual_;
  linguistic::LinguisticEncoderParams linguistic_;
  heads::QuestionEncoderParams question_;
  davl::DavlParams davl_;
  heads::OpenEndedHead open_ended_;
  heads::MultiChoiceHead multi_choice_;
};

}  // namespace livlr
