// SPDX-License-Identifier: Apache-2.0
//
// Visual encoder: holistic frame embeddings and per-frame object graphs
// (a typed spatial graph and a learned semantic graph).

#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "livlr/config.hpp"
#include "livlr/graph.hpp"
#include "livlr/param_store.hpp"
#include "livlr/tensor.hpp"

namespace livlr::visual {

// Pixel box with (x, y) the top-left corner.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }
  double area() const { return w * h; }
};

struct FrameSize {
  double width = 0.0;
  double height = 0.0;
};

struct FrameFeatures {
  Tensor appearance;  // [d_a]
  Tensor objects;     // [N_o x d_o]
  Tensor class_attr;  // [N_o x d_c]
  std::vector<Box> boxes;
  FrameSize size;

  std::size_t object_count() const { return boxes.size(); }
  // Row counts agree, boxes are non-degenerate and inside the frame.
  void validate() const;
};

struct ClipFeatures {
  std::vector<FrameFeatures> frames;

  void validate() const;
};

// Spatial relation categories, directed from i to j.
enum SpatialRelation : int {
  kNoRelation = 0,
  kInside = 1,   // i lies inside j
  kCovers = 2,   // i covers j
  kOverlap = 3,  // IoU >= 0.5
  // 4..11: octant of the direction from i's centre to j's centre, counter-
  // clockwise from east (image y axis pointing down).
  kFirstOctant = 4,
};

double iou(const Box& a, const Box& b);
int spatial_relation(const Box& from, const Box& to);

// Typed spatial graph over a frame's objects.
graph::DenseGraph classify_spatial_edges(std::span<const Box> boxes, FrameSize frame);

// [x, y, x + w, y + h, w, h] divided by frame width / height as appropriate.
std::vector<double> position_feature(const Box& b, FrameSize frame);

struct VisualEncoderParams {
  Tensor W_g, b_g;  // appearance -> d
  Tensor W_o, b_o;  // object feature -> d (shared by both graphs)
  Tensor W_p, b_p;  // 6-d position -> d
  Tensor W_sp0;     // [2d x d]
  Tensor W_c, b_c;  // class attribute -> d
  Tensor W_se0;     // [2d x d]
  std::vector<graph::TypedEdgeGcnLayer> spatial_layers;
  std::vector<graph::AttnGcnLayer> semantic_layers;
  Tensor W1, W2;  // graph learner
  std::size_t max_neighbors = 5;

  static void declare(const ModelConfig& cfg, std::vector<ParamSpec>& specs, const std::string& prefix = "visual");
  static VisualEncoderParams bind(ParamStore& store, const ModelConfig& cfg, const std::string& prefix = "visual");
};

// X_Vg: one affine-mapped appearance row per frame, [N_f x d].
Tensor encode_holistic(const VisualEncoderParams& p, const ClipFeatures& clip);

// Sum of the mean-pooled spatial and semantic graph outputs, [d].
Tensor encode_frame(const VisualEncoderParams& p, const FrameFeatures& frame);

// (X_Vg, X_Vl), both [N_f x d].
std::pair<Tensor, Tensor> encode_clip(const VisualEncoderParams& p, const ClipFeatures& clip);

}  // namespace livlr::visual
