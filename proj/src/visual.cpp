// SPDX-License-Identifier: Apache-2.0
#include "livlr/visual.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "livlr/errors.hpp"
#include "livlr/nn.hpp"
#include "livlr/ops.hpp"

namespace livlr::visual {
namespace {

void require_box(const Box& b) {
  if (!(b.w > 0.0) || !(b.h > 0.0)) {
    throw ContractError("degenerate box (w=" + std::to_string(b.w) + ", h=" + std::to_string(b.h) + ")");
  }
}

bool contains(const Box& outer, const Box& inner) {
  return inner.x >= outer.x && inner.y >= outer.y && inner.x + inner.w <= outer.x + outer.w &&
         inner.y + inner.h <= outer.y + outer.h;
}

bool same_box(const Box& a, const Box& b) { return a.x == b.x && a.y == b.y && a.w == b.w && a.h == b.h; }

void require_rows(const Tensor& t, std::size_t rows, const char* what) {
  if (t.rank() != 2 || t.dim(0) != rows) {
    throw DataError(std::string(what) + " must have " + std::to_string(rows) + " rows, got " + shape_str(t.shape()));
  }
}

}  // namespace

void FrameFeatures::validate() const {
  const std::size_t n = boxes.size();
  if (n == 0) throw DataError("frame has no objects");
  if (appearance.rank() != 1) throw DataError("appearance must be a vector, got " + shape_str(appearance.shape()));
  require_rows(objects, n, "objects");
  require_rows(class_attr, n, "class_attr");
  if (!(size.width > 0.0) || !(size.height > 0.0)) throw DataError("frame size must be positive");
  for (const auto& b : boxes) {
    if (!(b.w > 0.0) || !(b.h > 0.0)) throw DataError("degenerate box in frame");
    if (b.x < 0.0 || b.y < 0.0 || b.x + b.w > size.width || b.y + b.h > size.height) {
      throw DataError("box lies outside the frame");
    }
  }
}

void ClipFeatures::validate() const {
  if (frames.empty()) throw DataError("clip has no frames");
  for (const auto& f : frames) {
    f.validate();
    const auto& f0 = frames.front();
    if (f.object_count() != f0.object_count() || f.objects.dim(1) != f0.objects.dim(1) ||
        f.class_attr.dim(1) != f0.class_attr.dim(1) || f.appearance.dim(0) != f0.appearance.dim(0)) {
      throw DataError("frames in a clip must share object count and feature extents");
    }
  }
}

double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

int spatial_relation(const Box& from, const Box& to) {
  require_box(from);
  require_box(to);
  if (same_box(from, to)) return kOverlap;
  if (contains(to, from)) return kInside;
  if (contains(from, to)) return kCovers;
  if (iou(from, to) >= 0.5) return kOverlap;

  const double dx = to.cx() - from.cx();
  const double dy = from.cy() - to.cy();  // flip so that "up" is positive
  const double ux = std::max(from.x + from.w, to.x + to.w) - std::min(from.x, to.x);
  const double uy = std::max(from.y + from.h, to.y + to.h) - std::min(from.y, to.y);
  if (std::hypot(dx, dy) > std::hypot(ux, uy)) return kNoRelation;

  constexpr double kSector = std::numbers::pi / 4.0;
  double angle = std::atan2(dy, dx) + kSector / 2.0;
  if (angle < 0.0) angle += 2.0 * std::numbers::pi;
  const int octant = static_cast<int>(std::floor(angle / kSector)) % 8;
  return kFirstOctant + octant;
}

graph::DenseGraph classify_spatial_edges(std::span<const Box> boxes, FrameSize frame) {
  if (!(frame.width > 0.0) || !(frame.height > 0.0)) throw ContractError("frame size must be positive");
  auto g = graph::DenseGraph::empty(boxes.size());
  g.edge_types.assign(boxes.size() * boxes.size(), 0);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    for (std::size_t j = 0; j < boxes.size(); ++j) {
      if (i == j) continue;
      const int r = spatial_relation(boxes[i], boxes[j]);
      if (r != kNoRelation) g.add_edge(i, j, r);
    }
  }
  return g;
}

std::vector<double> position_feature(const Box& b, FrameSize frame) {
  return {b.x / frame.width,          b.y / frame.height, (b.x + b.w) / frame.width, (b.y + b.h) / frame.height,
          b.w / frame.width,          b.h / frame.height};
}

void VisualEncoderParams::declare(const ModelConfig& cfg, std::vector<ParamSpec>& specs, const std::string& prefix) {
  const std::size_t d = cfg.d;
  specs.push_back({prefix + ".holistic.W", {cfg.d_a, d}});
  specs.push_back({prefix + ".holistic.b", {d}, Init::kZeros});
  specs.push_back({prefix + ".object.W", {cfg.d_o, d}});
  specs.push_back({prefix + ".object.b", {d}, Init::kZeros});
  specs.push_back({prefix + ".position.W", {6, d}});
  specs.push_back({prefix + ".position.b", {d}, Init::kZeros});
  specs.push_back({prefix + ".sp_init.W", {2 * d, d}});
  specs.push_back({prefix + ".class_attr.W", {cfg.d_c, d}});
  specs.push_back({prefix + ".class_attr.b", {d}, Init::kZeros});
  specs.push_back({prefix + ".se_init.W", {2 * d, d}});
  specs.push_back({prefix + ".learner.W1", {d, d}});
  specs.push_back({prefix + ".learner.W2", {d, d}});
  for (std::size_t l = 0; l < cfg.gcn_layers; ++l) {
    const std::string sp = prefix + ".sp_gcn.l" + std::to_string(l);
    specs.push_back({sp + ".W", {d, d}});
    specs.push_back({sp + ".b_edge", {graph::kSpatialEdgeTypes}, Init::kZeros});
    specs.push_back({sp + ".Wq", {d, d}});
    specs.push_back({sp + ".Wk", {d, d}});
    const std::string se = prefix + ".se_gcn.l" + std::to_string(l);
    specs.push_back({se + ".W", {d, d}});
    specs.push_back({se + ".Wq", {d, d}});
    specs.push_back({se + ".Wk", {d, d}});
  }
}

VisualEncoderParams VisualEncoderParams::bind(ParamStore& s, const ModelConfig& cfg, const std::string& prefix) {
  VisualEncoderParams p;
  p.W_g = s.get(prefix + ".holistic.W");
  p.b_g = s.get(prefix + ".holistic.b");
  p.W_o = s.get(prefix + ".object.W");
  p.b_o = s.get(prefix + ".object.b");
  p.W_p = s.get(prefix + ".position.W");
  p.b_p = s.get(prefix + ".position.b");
  p.W_sp0 = s.get(prefix + ".sp_init.W");
  p.W_c = s.get(prefix + ".class_attr.W");
  p.b_c = s.get(prefix + ".class_attr.b");
  p.W_se0 = s.get(prefix + ".se_init.W");
  p.W1 = s.get(prefix + ".learner.W1");
  p.W2 = s.get(prefix + ".learner.W2");
  p.max_neighbors = cfg.N_n;
  for (std::size_t l = 0; l < cfg.gcn_layers; ++l) {
    const std::string sp = prefix + ".sp_gcn.l" + std::to_string(l);
    p.spatial_layers.push_back({s.get(sp + ".W"), s.get(sp + ".b_edge"), s.get(sp + ".Wq"), s.get(sp + ".Wk")});
    const std::string se = prefix + ".se_gcn.l" + std::to_string(l);
    p.semantic_layers.push_back({s.get(se + ".W"), s.get(se + ".Wq"), s.get(se + ".Wk")});
  }
  return p;
}

Tensor encode_holistic(const VisualEncoderParams& p, const ClipFeatures& clip) {
  std::vector<Tensor> rows;
  rows.reserve(clip.frames.size());
  for (const auto& f : clip.frames) rows.push_back(f.appearance);
  return nn::affine(ops::stack_rows(rows), p.W_g, p.b_g);
}

Tensor encode_frame(const VisualEncoderParams& p, const FrameFeatures& frame) {
  const std::size_t n = frame.object_count();
  std::vector<double> pos;
  pos.reserve(6 * n);
  for (const auto& b : frame.boxes) {
    auto f = position_feature(b, frame.size);
    pos.insert(pos.end(), f.begin(), f.end());
  }
  auto objects = nn::affine(frame.objects, p.W_o, p.b_o);
  auto position = nn::affine(Tensor::matrix(n, 6, std::move(pos)), p.W_p, p.b_p);
  auto attrs = nn::affine(frame.class_attr, p.W_c, p.b_c);

  auto spatial = ops::matmul(ops::concat({objects, position}), p.W_sp0);
  const auto spatial_graph = classify_spatial_edges(frame.boxes, frame.size);
  for (const auto& layer : p.spatial_layers) spatial = graph::typed_edge_gcn_layer(layer, spatial, spatial_graph);

  auto semantic = ops::matmul(ops::concat({objects, attrs}), p.W_se0);
  const auto learned = graph::learn_adjacency(p.W1, p.W2, semantic, p.max_neighbors);
  for (const auto& layer : p.semantic_layers) semantic = graph::attn_gcn_layer(layer, semantic, learned.graph);

  return ops::add(graph::mean_pool(spatial), graph::mean_pool(semantic));
}

std::pair<Tensor, Tensor> encode_clip(const VisualEncoderParams& p, const ClipFeatures& clip) {
  if (clip.frames.empty()) throw DataError("clip has no frames");
  std::vector<Tensor> local;
  local.reserve(clip.frames.size());
  for (const auto& f : clip.frames) local.push_back(encode_frame(p, f));
  return {encode_holistic(p, clip), ops::stack_rows(local)};
}

}  // namespace livlr::visual
