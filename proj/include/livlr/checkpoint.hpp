// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoints, little-endian throughout:
//
//   "LVLR"                 4 bytes
//   version                u32
//   config length          u32, then that many bytes of canonical JSON
//   tensor count           u32
//   per tensor, in name order:
//     name length          u32, then the UTF-8 name
//     rank                 u32
//     dims                 u64 each
//     data                 float32 each, row-major

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "livlr/config.hpp"
#include "livlr/model.hpp"
#include "livlr/param_store.hpp"

namespace livlr {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::string config_json;
  std::vector<NamedTensor> tensors;
};

std::vector<std::uint8_t> encode_checkpoint(const ModelConfig& cfg, const ParamStore& params);
// Raises CheckpointError with kBadMagic, kBadVersion or kTruncated.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ParamStore& params);
Checkpoint read_checkpoint(const std::string& path);

// Copies every tensor into `params`. A shape disagreement (kShapeMismatch),
// a tensor the store lacks (kUnknownTensor) or a store entry the file lacks
// (kMissingTensor) is an error naming the tensor; `params` is untouched on
// failure.
void load_into(const Checkpoint& ckpt, ParamStore& params);

// Rebuilds the model described by the embedded config and loads its weights.
std::unique_ptr<LivlrModel> load_model(const std::string& path);

}  // namespace livlr
