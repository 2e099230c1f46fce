// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "livlr/errors.hpp"
#include "livlr/visual.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace livlr;
using oracle::Mat;
using visual::Box;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.d = 6;
  cfg.d_a = 5;
  cfg.d_o = 4;
  cfg.d_c = 3;
  cfg.N_n = 2;
  return cfg;
}

struct Encoder {
  ParamStore store;
  visual::VisualEncoderParams p;
};

// Zero-initialised biases are replaced by random values so the oracle sees
// every term.
Encoder make_encoder(const ModelConfig& cfg, std::uint64_t seed) {
  Encoder e;
  std::vector<ParamSpec> specs;
  visual::VisualEncoderParams::declare(cfg, specs);
  materialize(e.store, specs, seed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& [name, entry] : e.store)
    if (name.ends_with(".b") || name.ends_with(".b_edge"))
      for (auto& x : entry.value.mutable_data()) x = n(rng);
  e.p = visual::VisualEncoderParams::bind(e.store, cfg);
  return e;
}

std::vector<double> vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

visual::FrameFeatures random_frame(std::mt19937_64& rng, const ModelConfig& cfg, std::size_t n_objects) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  visual::FrameFeatures f;
  f.size = {320, 240};
  f.appearance = testutil::random_tensor(rng, {cfg.d_a});
  f.objects = testutil::random_tensor(rng, {n_objects, cfg.d_o});
  f.class_attr = testutil::random_tensor(rng, {n_objects, cfg.d_c});
  for (std::size_t i = 0; i < n_objects; ++i) {
    const double w = 20 + 100 * u(rng), h = 20 + 100 * u(rng);
    f.boxes.push_back({u(rng) * (320 - w), u(rng) * (240 - h), w, h});
  }
  return f;
}

Mat position_matrix(const visual::FrameFeatures& f) {
  Mat m(f.boxes.size(), 6);
  for (std::size_t i = 0; i < f.boxes.size(); ++i) {
    const auto& b = f.boxes[i];
    const double W = f.size.width, H = f.size.height;
    const double row[6] = {b.x / W, b.y / H, (b.x + b.w) / W, (b.y + b.h) / H, b.w / W, b.h / H};
    for (std::size_t c = 0; c < 6; ++c) m(i, c) = row[c];
  }
  return m;
}

// Straight-line frame composition: projections, the typed spatial layer,
// the learned semantic layer, then the sum of the two means.
std::vector<double> frame_oracle(const visual::VisualEncoderParams& p, const visual::FrameFeatures& f) {
  const auto M = [](const Tensor& t) { return oracle::from(t); };
  const Mat obj = oracle::affine(M(f.objects), M(p.W_o), vec(p.b_o));
  const Mat pos = oracle::affine(position_matrix(f), M(p.W_p), vec(p.b_p));
  const Mat attr = oracle::affine(M(f.class_attr), M(p.W_c), vec(p.b_c));

  Mat sp = oracle::matmul(oracle::hconcat(obj, pos), M(p.W_sp0));
  const auto g = visual::classify_spatial_edges(f.boxes, f.size);
  const std::size_t n = f.boxes.size();
  oracle::Adj adj(n, std::vector<bool>(n, false));
  std::vector<std::vector<int>> types(n, std::vector<int>(n, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (g.has_edge(i, j)) {
        adj[i][j] = true;
        types[i][j] = static_cast<int>(g.edge_type(i, j));
      }
  for (const auto& l : p.spatial_layers) sp = oracle::typed_gcn(sp, M(l.W_sp), vec(l.b_edge), M(l.Wq), M(l.Wk), adj, types);

  Mat se = oracle::matmul(oracle::hconcat(obj, attr), M(p.W_se0));
  const auto learned = oracle::top_k(oracle::bilinear_scores(se, M(p.W1), M(p.W2)), p.max_neighbors);
  for (const auto& l : p.semantic_layers) se = oracle::attn_gcn(se, M(l.W), M(l.Wq), M(l.Wk), learned);

  auto out = oracle::mean_rows(sp);
  const auto b = oracle::mean_rows(se);
  for (std::size_t c = 0; c < out.size(); ++c) out[c] += b[c];
  return out;
}

}  // namespace

TEST_SUITE("visual-encoder") {

TEST_CASE("spatial relation hand cases") {
  const Box outer{10, 10, 100, 100}, inner{40, 40, 20, 20};
  CHECK(visual::spatial_relation(inner, outer) == visual::kInside);
  CHECK(visual::spatial_relation(outer, inner) == visual::kCovers);
  CHECK(visual::spatial_relation(inner, inner) == visual::kOverlap);
  const Box shifted{12, 10, 100, 100};
  CHECK(visual::iou(outer, shifted) >= 0.5);
  CHECK(visual::spatial_relation(outer, shifted) == visual::kOverlap);

  const Box a{0, 100, 20, 20};
  CHECK(visual::spatial_relation(a, {30, 100, 20, 20}) == 4);   // east
  CHECK(visual::spatial_relation(a, {30, 70, 20, 20}) == 5);    // north-east (up in the image)
  CHECK(visual::spatial_relation(a, {0, 70, 20, 20}) == 6);     // north
  CHECK(visual::spatial_relation({30, 100, 20, 20}, a) == 8);   // west
  CHECK(visual::spatial_relation(a, {0, 130, 20, 20}) == 10);   // south
  CHECK(visual::spatial_relation(a, {30, 130, 20, 20}) == 11);  // south-east
  // Both centres lie inside the union box, so the distance cut never fires
  // and far-apart pairs still get an octant.
  CHECK(visual::spatial_relation({0, 0, 10, 10}, {200, 0, 10, 10}) == 4);
  CHECK_THROWS_AS(visual::spatial_relation({0, 0, 0, 10}, a), ContractError);
}

TEST_CASE("spatial edge classification properties") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Box> boxes;
    for (int i = 0; i < 5; ++i) {
      const double w = 5 + 60 * u(rng), h = 5 + 60 * u(rng);
      boxes.push_back({u(rng) * 100, u(rng) * 100, w, h});
    }
    if (trial % 10 == 0) boxes.push_back({boxes[0].x + 1, boxes[0].y + 1, boxes[0].w / 2, boxes[0].h / 2});
    const auto g = visual::classify_spatial_edges(boxes, {200, 200});
    g.validate();
    std::vector<Box> moved;
    const double s = trial % 2 ? 2.0 : 1.0;
    for (const auto& b : boxes) moved.push_back({s * (b.x + 8), s * (b.y + 16), s * b.w, s * b.h});
    const auto gm = visual::classify_spatial_edges(moved, {s * 400, s * 400});
    for (std::size_t i = 0; i < boxes.size(); ++i)
      for (std::size_t j = 0; j < boxes.size(); ++j) {
        CHECK(g.has_edge(i, j) == gm.has_edge(i, j));
        CHECK(g.edge_type(i, j) == gm.edge_type(i, j));
        if (!g.has_edge(i, j)) continue;
        CHECK(g.edge_type(i, j) >= 1);
        CHECK(g.edge_type(i, j) <= 11);
        if (g.edge_type(i, j) == visual::kInside) CHECK(g.edge_type(j, i) == visual::kCovers);
        if (g.edge_type(i, j) == visual::kOverlap) CHECK(g.edge_type(j, i) == visual::kOverlap);
        if (g.edge_type(i, j) >= visual::kFirstOctant) CHECK(g.edge_type(j, i) == 4 + (g.edge_type(i, j) - 4 + 4) % 8);
      }
  }
}

TEST_CASE("position feature") {
  const auto f = visual::position_feature({32, 24, 64, 48}, {320, 240});
  const std::vector<double> expect = {0.1, 0.1, 0.3, 0.3, 0.2, 0.2};
  for (std::size_t i = 0; i < 6; ++i) CHECK(f[i] == doctest::Approx(expect[i]));
}

TEST_CASE("frame and clip validation") {
  const auto cfg = small_config();
  std::mt19937_64 rng(32);
  auto f = random_frame(rng, cfg, 3);
  f.validate();
  auto bad = f;
  bad.boxes.pop_back();
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = f;
  bad.boxes[0].x = 319;
  CHECK_THROWS_AS(bad.validate(), DataError);
  visual::ClipFeatures clip{{f, random_frame(rng, cfg, 4)}};
  CHECK_THROWS_AS(clip.validate(), DataError);
  CHECK_THROWS_AS(visual::ClipFeatures{}.validate(), DataError);
}

TEST_CASE("holistic projection") {
  PrecisionScope scope(Precision::kDouble);
  auto cfg = small_config();
  std::mt19937_64 rng(33);
  auto e = make_encoder(cfg, 1);
  visual::ClipFeatures clip{{random_frame(rng, cfg, 3), random_frame(rng, cfg, 3)}};
  auto out = visual::encode_holistic(e.p, clip);
  Mat app(2, cfg.d_a);
  for (std::size_t f = 0; f < 2; ++f)
    for (std::size_t c = 0; c < cfg.d_a; ++c) app(f, c) = clip.frames[f].appearance.at(c);
  CHECK(oracle::max_rel_diff(vec(out), oracle::affine(app, oracle::from(e.p.W_g), vec(e.p.b_g)).v) <= 1e-6);

  for (auto* t : {&e.p.W_g, &e.p.b_g}) std::fill(t->mutable_data().begin(), t->mutable_data().end(), 0.0);
  for (double x : visual::encode_holistic(e.p, clip).data()) CHECK(x == 0.0);

  cfg.d_a = cfg.d;
  auto id = make_encoder(cfg, 2);
  std::fill(id.p.b_g.mutable_data().begin(), id.p.b_g.mutable_data().end(), 0.0);
  auto W = id.p.W_g.mutable_data();
  std::fill(W.begin(), W.end(), 0.0);
  for (std::size_t i = 0; i < cfg.d; ++i) W[i * cfg.d + i] = 1.0;
  auto fr = random_frame(rng, cfg, 2);
  auto rows = visual::encode_holistic(id.p, {{fr}});
  CHECK(vec(rows) == vec(fr.appearance));
}

TEST_CASE("frame encoding matches the composition oracle") {
  PrecisionScope scope(Precision::kDouble);
  const auto cfg = small_config();
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 20; ++trial) {
    auto e = make_encoder(cfg, 100 + trial);
    const auto f = random_frame(rng, cfg, 4);
    CHECK(oracle::max_rel_diff(vec(visual::encode_frame(e.p, f)), frame_oracle(e.p, f)) <= 1e-6);
  }
}

TEST_CASE("single object frame") {
  PrecisionScope scope(Precision::kDouble);
  const auto cfg = small_config();
  std::mt19937_64 rng(35);
  auto e = make_encoder(cfg, 3);
  const auto f = random_frame(rng, cfg, 1);
  const auto M = [](const Tensor& t) { return oracle::from(t); };
  const Mat obj = oracle::affine(M(f.objects), M(e.p.W_o), vec(e.p.b_o));
  const Mat sp = oracle::matmul(oracle::hconcat(obj, oracle::affine(position_matrix(f), M(e.p.W_p), vec(e.p.b_p))),
                                M(e.p.W_sp0));
  const Mat se = oracle::matmul(oracle::hconcat(obj, oracle::affine(M(f.class_attr), M(e.p.W_c), vec(e.p.b_c))),
                                M(e.p.W_se0));
  std::vector<double> expect(cfg.d);
  for (std::size_t c = 0; c < cfg.d; ++c) expect[c] = std::max(sp.v[c], 0.0) + std::max(se.v[c], 0.0);
  CHECK(oracle::max_rel_diff(vec(visual::encode_frame(e.p, f)), expect) <= 1e-12);
}

TEST_CASE("zero parameters give a zero frame vector") {
  const auto cfg = small_config();
  std::mt19937_64 rng(36);
  auto e = make_encoder(cfg, 4);
  for (auto& [name, entry] : e.store) std::fill(entry.value.mutable_data().begin(), entry.value.mutable_data().end(), 0.0);
  for (double x : visual::encode_frame(e.p, random_frame(rng, cfg, 4)).data()) CHECK(x == 0.0);
}

TEST_CASE("object order does not change the frame vector") {
  PrecisionScope scope(Precision::kDouble);
  const auto cfg = small_config();
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    auto e = make_encoder(cfg, 200 + trial);
    const auto f = random_frame(rng, cfg, 5);
    std::vector<std::size_t> perm(5);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto g = f;
    g.objects = f.objects.detach();
    g.class_attr = f.class_attr.detach();
    auto obj = g.objects.mutable_data();
    auto attr = g.class_attr.mutable_data();
    for (std::size_t k = 0; k < 5; ++k) {
      g.boxes[k] = f.boxes[perm[k]];
      for (std::size_t c = 0; c < cfg.d_o; ++c) obj[k * cfg.d_o + c] = f.objects.at(perm[k], c);
      for (std::size_t c = 0; c < cfg.d_c; ++c) attr[k * cfg.d_c + c] = f.class_attr.at(perm[k], c);
    }
    CHECK(oracle::max_rel_diff(vec(visual::encode_frame(e.p, f)), vec(visual::encode_frame(e.p, g))) <= 1e-6);
  }
}

TEST_CASE("clip encoding stacks independent frames") {
  PrecisionScope scope(Precision::kDouble);
  const auto cfg = small_config();
  std::mt19937_64 rng(38);
  auto e = make_encoder(cfg, 5);
  visual::ClipFeatures clip;
  for (int f = 0; f < 3; ++f) clip.frames.push_back(random_frame(rng, cfg, 4));
  auto [g, l] = visual::encode_clip(e.p, clip);
  CHECK(g.shape() == Shape{3, cfg.d});
  CHECK(l.shape() == Shape{3, cfg.d});
  for (std::size_t f = 0; f < 3; ++f) {
    const auto expect = frame_oracle(e.p, clip.frames[f]);
    const std::vector<double> row(l.data().begin() + f * cfg.d, l.data().begin() + (f + 1) * cfg.d);
    CHECK(oracle::max_rel_diff(row, expect) <= 1e-6);
  }
  visual::ClipFeatures reversed{{clip.frames[2], clip.frames[1], clip.frames[0]}};
  auto [gr, lr] = visual::encode_clip(e.p, reversed);
  for (std::size_t f = 0; f < 3; ++f)
    for (std::size_t c = 0; c < cfg.d; ++c) {
      CHECK(gr.at(f, c) == g.at(2 - f, c));
      CHECK(lr.at(f, c) == l.at(2 - f, c));
    }
  auto [g1, l1] = visual::encode_clip(e.p, {{clip.frames[0]}});
  CHECK(l1.shape() == Shape{1, cfg.d});
  for (std::size_t c = 0; c < cfg.d; ++c) CHECK(l1.at(0, c) == l.at(0, c));
}

TEST_CASE("clip encoding passes a finite-difference check") {
  const auto cfg = small_config();
  std::mt19937_64 rng(39);
  auto e = make_encoder(cfg, 6);
  visual::ClipFeatures clip{{random_frame(rng, cfg, 4), random_frame(rng, cfg, 3)}};
  auto fn = [&] {
    auto [g, l] = visual::encode_clip(e.p, clip);
    return ops::add(g, l);
  };
  CHECK(testutil::fd_worst(e.store, fn) < 1e-4);
}

}
