// SPDX-License-Identifier: Apache-2.0
//
// Samples, datasets and the synthetic task generator.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "livlr/config.hpp"
#include "livlr/linguistic.hpp"
#include "livlr/tensor.hpp"
#include "livlr/visual.hpp"

namespace livlr::data {

struct Sample {
  visual::ClipFeatures clip;                   // N_f frames
  std::vector<linguistic::Sentence> sentences;  // N_s sentences
  Tensor question;                             // [N_t x d_t]
  std::vector<Tensor> candidates;              // N_k token matrices, multiple-choice only
  std::size_t label = 0;                       // answer id (OE) or correct candidate (MC)
};

// Throws DataError when the sample's extents disagree with `cfg`.
void validate_sample(const Sample& s, const ModelConfig& cfg);

enum class SignalSource {
  kHolisticVisual,
  kFinegrainedVisual,
  kHolisticLinguistic,
  kFinegrainedLinguistic,
  kQuestionDependent,
};

std::string to_string(SignalSource s);
SignalSource parse_signal_source(std::string_view s);

struct SyntheticTaskSpec {
  std::size_t n_samples = 64;
  SignalSource signal_source = SignalSource::kFinegrainedVisual;
  double noise_scale = 0.1;
  std::size_t n_classes = 4;
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const SyntheticTaskSpec& spec);
// Unknown keys raise ConfigError.
SyntheticTaskSpec task_spec_from_json(const nlohmann::json& j);

struct Dataset {
  std::vector<Sample> samples;
  // Planted source per sample (0..3 in the order of SignalSource) for
  // question-dependent data; empty otherwise.
  std::vector<std::size_t> planted_source;
};

// The label is planted into one channel with additive Gaussian noise of
// scale `noise_scale`; every other channel is independent standard normal
// noise. Planted channels:
//   holistic_visual        every frame's appearance vector is a class prototype
//   finegrained_visual     every object's class-attribute vector is a class prototype
//   holistic_linguistic    the first half of sentence 0's tokens are a class prototype
//   finegrained_linguistic the first argument role of sentence 0 is 2 + class
//   question_dependent     each of the four channels above carries its own label;
//                          question token 0 is a selector naming the channel
//                          that answers
// Multiple-choice samples present the class prototypes of N_k distinct
// classes as candidates; the label is the position of the true class.
Dataset gen_synthetic(const SyntheticTaskSpec& spec, const ModelConfig& cfg);

// JSON lines: a header object followed by one sample per line.
void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

nlohmann::json sample_to_json(const Sample& s);
Sample sample_from_json(const nlohmann::json& j);

}  // namespace livlr::data
