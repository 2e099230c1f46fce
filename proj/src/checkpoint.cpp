// SPDX-License-Identifier: Apache-2.0
#include "livlr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "livlr/errors.hpp"

namespace livlr {
namespace {

constexpr char kMagic[4] = {'L', 'V', 'L', 'R'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::size_t v) {
    if (v > UINT32_MAX) throw CheckpointError(CheckpointError::Kind::kIo, "value too large for a u32 field");
    le(static_cast<std::uint32_t>(v));
  }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}

  template <typename T>
  T le(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  float f32(const char* what) { return std::bit_cast<float>(le<std::uint32_t>(what)); }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (b_.size() - pos_ < n) {
      throw CheckpointError(CheckpointError::Kind::kTruncated,
                            std::string("checkpoint truncated while reading ") + what + " at byte " +
                                std::to_string(pos_));
    }
  }

  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelConfig& cfg, const ParamStore& params) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.le(kCheckpointVersion);
  const std::string config = canonical_json(cfg);
  w.u32(config.size());
  w.bytes(config.data(), config.size());
  w.u32(params.size());
  for (const auto& [name, entry] : params) {
    w.u32(name.size());
    w.bytes(name.data(), name.size());
    const auto& shape = entry.value.shape();
    w.u32(shape.size());
    for (auto dim : shape) w.le(static_cast<std::uint64_t>(dim));
    for (double v : entry.value.data()) w.f32(static_cast<float>(v));
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof kMagic) throw CheckpointError(CheckpointError::Kind::kTruncated, "checkpoint is truncated");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw CheckpointError(CheckpointError::Kind::kBadMagic, "not a checkpoint: magic bytes are not \"LVLR\"");
  }
  Reader r(bytes);
  r.str(sizeof kMagic, "magic");
  const auto version = r.le<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointError::Kind::kBadVersion, "unsupported checkpoint version " +
                                                                   std::to_string(version) + " (expected " +
                                                                   std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ckpt;
  ckpt.config_json = r.str(r.le<std::uint32_t>("config length"), "config");
  const auto count = r.le<std::uint32_t>("tensor count");
  for (std::uint32_t t = 0; t < count; ++t) {
    NamedTensor nt;
    nt.name = r.str(r.le<std::uint32_t>("name length"), "tensor name");
    const auto rank = r.le<std::uint32_t>("rank");
    for (std::uint32_t k = 0; k < rank; ++k) nt.shape.push_back(static_cast<std::size_t>(r.le<std::uint64_t>("dims")));
    const std::size_t n = shape_numel(nt.shape);
    nt.values.reserve(n);
    for (std::size_t i = 0; i < n; ++i) nt.values.push_back(r.f32("tensor data"));
    ckpt.tensors.push_back(std::move(nt));
  }
  if (!r.done()) throw CheckpointError(CheckpointError::Kind::kIo, "trailing bytes after the last tensor");
  return ckpt;
}

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ParamStore& params) {
  const auto bytes = encode_checkpoint(cfg, params);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(CheckpointError::Kind::kIo, "cannot write checkpoint '" + path + "'");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::kIo, "cannot open checkpoint '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void load_into(const Checkpoint& ckpt, ParamStore& params) {
  for (const auto& nt : ckpt.tensors) {
    if (!params.contains(nt.name)) {
      throw CheckpointError(CheckpointError::Kind::kUnknownTensor,
                            "checkpoint tensor '" + nt.name + "' has no counterpart in the model");
    }
    const auto& have = params.get(nt.name).shape();
    if (have != nt.shape) {
      throw CheckpointError(CheckpointError::Kind::kShapeMismatch, "tensor '" + nt.name + "': checkpoint shape " +
                                                                       shape_str(nt.shape) + ", model shape " +
                                                                       shape_str(have));
    }
  }
  if (ckpt.tensors.size() != params.size()) {
    for (const auto& name : params.names()) {
      bool found = false;
      for (const auto& nt : ckpt.tensors) found = found || nt.name == name;
      if (!found) {
        throw CheckpointError(CheckpointError::Kind::kMissingTensor, "model tensor '" + name + "' is missing");
      }
    }
  }
  for (const auto& nt : ckpt.tensors) {
    auto dst = params.get(nt.name).mutable_data();
    for (std::size_t i = 0; i < nt.values.size(); ++i) dst[i] = static_cast<double>(nt.values[i]);
  }
}

std::unique_ptr<LivlrModel> load_model(const std::string& path) {
  const auto ckpt = read_checkpoint(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ckpt.config_json);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::kIo, std::string("embedded config is not JSON: ") + e.what());
  }
  auto model = std::make_unique<LivlrModel>(config_from_json(j));
  load_into(ckpt, model->params());
  return model;
}

}  // namespace livlr
