// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "livlr/param_store.hpp"
#include "livlr/tensor.hpp"

namespace livlr {

enum class RiVariant { kDavl, kRiGcn, kRiAt, kRiConcat };
enum class QuestionSetting { kOpenEnded, kMultiChoice };

std::string to_string(RiVariant v);
std::string to_string(QuestionSetting s);
std::string to_string(Precision p);
RiVariant parse_ri_variant(std::string_view s);
QuestionSetting parse_question_setting(std::string_view s);
Precision parse_precision(std::string_view s);

struct ModelConfig {
  // Extents.
  std::size_t d = 32;    // shared embedding width
  std::size_t d_a = 64;  // frame appearance features
  std::size_t d_o = 64;  // object region features
  std::size_t d_c = 32;  // object class-attribute features
  std::size_t d_t = 32;  // token features
  std::size_t N_f = 4;   // frames per clip
  std::size_t N_o = 5;   // objects per frame
  std::size_t N_s = 3;   // description sentences per sample
  std::size_t N_t = 6;   // tokens per sentence / question
  std::size_t N_r = 16;  // semantic role vocabulary
  std::size_t N_n = 5;   // neighbours kept by the graph learners
  std::size_t N_h = 4;   // question-attention heads
  std::size_t N_k = 4;   // multiple-choice candidates
  std::size_t answer_set_size = 8;
  std::size_t classifier_hidden = 32;
  std::size_t gcn_layers = 1;

  RiVariant ri_variant = RiVariant::kDavl;
  QuestionSetting question_setting = QuestionSetting::kOpenEnded;
  Precision precision = Precision::kSingle;

  // Architecture switches.
  bool head_output_map = true;          // per-head (d/N_h x d/N_h) map in question attention
  bool davl_normalize_messages = true;  // divide integration-GCN messages by neighbour count
  bool davl_attention_gcn = false;      // attention-weighted integration GCN (experimental)

  // Optimisation.
  std::uint64_t seed = 0;
  double lr = 8e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  std::size_t batch_size = 16;
  std::size_t epochs = 80;

  // Throws ConfigError naming the offending field.
  void validate() const;

  AdamWOptions adamw() const { return {lr, beta1, beta2, eps, weight_decay}; }
};

// Named presets: "tiny" (acceptance scale), "desk" (default), "paper"
// (published extents; MSRVTT-QA setting).
ModelConfig preset(std::string_view name);

// Every field is written; keys are sorted.
nlohmann::json to_json(const ModelConfig& cfg);
// Accepts an optional "preset" key as the base and rejects unknown keys.
ModelConfig config_from_json(const nlohmann::json& j);
std::string canonical_json(const ModelConfig& cfg);
ModelConfig load_config(const std::string& path);
void save_config(const ModelConfig& cfg, const std::string& path);

}  // namespace livlr
