// SPDX-License-Identifier: Apache-2.0
#include "livlr/model.hpp"

namespace livlr {

std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<ParamSpec> specs;
  visual::VisualEncoderParams::declare(cfg, specs);
  linguistic::LinguisticEncoderParams::declare(cfg, specs);
  heads::QuestionEncoderParams::declare(cfg, specs);
  davl::DavlParams::declare(cfg, specs);
  if (cfg.question_setting == QuestionSetting::kOpenEnded) {
    heads::OpenEndedHead::declare(cfg, specs);
  } else {
    heads::MultiChoiceHead::declare(cfg, specs);
  }
  return specs;
}

LivlrModel::LivlrModel(const ModelConfig& cfg) : cfg_(cfg) {
  PrecisionScope scope(cfg_.precision);
  materialize(store_, param_specs(cfg_), cfg_.seed);
  bind();
}

void LivlrModel::bind() {
  visual_ = visual::VisualEncoderParams::bind(store_, cfg_);
  linguistic_ = linguistic::LinguisticEncoderParams::bind(store_, cfg_);
  question_ = heads::QuestionEncoderParams::bind(store_);
  davl_ = davl::DavlParams::bind(store_, cfg_);
  if (cfg_.question_setting == QuestionSetting::kOpenEnded) {
    open_ended_ = heads::OpenEndedHead::bind(store_);
  } else {
    multi_choice_ = heads::MultiChoiceHead::bind(store_);
  }
}

std::pair<Tensor, Tensor> LivlrModel::encode(const data::Sample& sample, RiVariant variant) const {
  auto [X_Vg, X_Vl] = visual::encode_clip(visual_, sample.clip);
  auto [X_Lg, X_Ll] = linguistic::encode_all(linguistic_, sample.sentences);
  auto q = heads::encode_question(question_, sample.question);
  return {davl::integrate(davl_, {X_Vg, X_Vl, X_Lg, X_Ll}, q.tokens, variant), q.summary};
}

Tensor LivlrModel::joint_representation(const data::Sample& sample, RiVariant variant) const {
  PrecisionScope scope(cfg_.precision);
  return encode(sample, variant).first;
}

ForwardResult LivlrModel::forward(const data::Sample& sample) const {
  PrecisionScope scope(cfg_.precision);
  auto [joint, question] = encode(sample, cfg_.ri_variant);
  ForwardResult r;
  if (cfg_.question_setting == QuestionSetting::kOpenEnded) {
    r.scores = heads::predict_open_ended(open_ended_, joint, question);
    r.loss = heads::cross_entropy(r.scores, sample.label);
  } else {
    r.scores = heads::predict_multichoice(multi_choice_, joint, question, sample.candidates);
    r.loss = heads::hinge_loss(r.scores, sample.label);
  }
  r.prediction = heads::argmax(r.scores);
  return r;
}

}  // namespace livlr
