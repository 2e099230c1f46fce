// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "livlr/davl.hpp"
#include "livlr/errors.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace livlr;
using oracle::Mat;

namespace {

ModelConfig small_config(RiVariant variant = RiVariant::kDavl) {
  ModelConfig cfg;
  cfg.d = 8;
  cfg.N_h = 2;
  cfg.N_n = 2;
  cfg.N_f = 2;
  cfg.N_s = 1;
  cfg.ri_variant = variant;
  return cfg;
}

struct Module {
  ParamStore store;
  davl::DavlParams p;
};

Module make_module(const ModelConfig& cfg, std::uint64_t seed, bool random_index = true) {
  Module m;
  std::vector<ParamSpec> specs;
  davl::DavlParams::declare(cfg, specs);
  materialize(m.store, specs, seed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.5);
  for (auto& [name, entry] : m.store) {
    if (name == "davl.index" && random_index)
      for (auto& x : entry.value.mutable_data()) x = 1.0 + n(rng);
    if (name.ends_with(".b"))
      for (auto& x : entry.value.mutable_data()) x = n(rng);
  }
  m.p = davl::DavlParams::bind(m.store, cfg);
  return m;
}

struct Inputs {
  std::vector<Mat> sources;  // X_Vg, X_Vl, X_Lg, X_Ll
  Mat Q;

  davl::RepresentationBundle bundle() const {
    return {oracle::to_tensor(sources[0]), oracle::to_tensor(sources[1]), oracle::to_tensor(sources[2]),
            oracle::to_tensor(sources[3])};
  }
};

Inputs random_inputs(std::mt19937_64& rng, const ModelConfig& cfg) {
  Inputs in;
  for (std::size_t rows : {cfg.N_f, cfg.N_f, cfg.N_s, cfg.N_s}) in.sources.push_back(oracle::random_mat(rng, rows, cfg.d));
  in.Q = oracle::random_mat(rng, cfg.N_t, cfg.d);
  return in;
}

std::vector<oracle::Head> heads_of(const davl::QuestionAttentionBlock& b) {
  std::vector<oracle::Head> out;
  for (const auto& h : b.heads)
    out.push_back({oracle::from(h.Wq), oracle::from(h.Wk), oracle::from(h.Wv), h.Wo.defined() ? oracle::from(h.Wo) : Mat{}});
  return out;
}

std::vector<std::vector<oracle::Head>> all_heads(const davl::DavlParams& p) {
  std::vector<std::vector<oracle::Head>> out;
  for (const auto& b : p.attention) out.push_back(heads_of(b));
  return out;
}

std::vector<double> vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Mat attended(const davl::DavlParams& p, const Inputs& in) {
  Mat stacked(0, in.Q.cols);
  for (std::size_t s = 0; s < 4; ++s) {
    const Mat part = oracle::question_attention(heads_of(p.attention[s]), in.sources[s], in.Q);
    stacked.v.insert(stacked.v.end(), part.v.begin(), part.v.end());
    stacked.rows += part.rows;
  }
  return stacked;
}

// Co-attention over all other nodes, residual, mean.
std::vector<double> co_attention_oracle(const Mat& V) {
  const std::size_t n = V.rows, d = V.cols;
  std::vector<double> pooled(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> w(n, 0.0);
    double mx = -1e300, z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += V(i, c) * V(j, c);
      w[j] = s / std::sqrt(static_cast<double>(d));
      mx = std::max(mx, w[j]);
    }
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) z += (w[j] = std::exp(w[j] - mx));
    for (std::size_t c = 0; c < d; ++c) {
      double acc = V(i, c);
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) acc += w[j] / z * V(j, c);
      pooled[c] += acc / static_cast<double>(n);
    }
  }
  return pooled;
}

}  // namespace

TEST_SUITE("davl") {

TEST_CASE("question attention") {
  PrecisionScope scope(Precision::kDouble);
  std::mt19937_64 rng(51);
  SUBCASE("one question token makes the output independent of X") {
    auto cfg = small_config();
    cfg.N_t = 1;
    auto m = make_module(cfg, 1);
    const auto Q = testutil::random_tensor(rng, {1, cfg.d});
    const auto a = davl::question_attention(m.p.attention[0], testutil::random_tensor(rng, {3, cfg.d}), Q);
    const auto b = davl::question_attention(m.p.attention[0], testutil::random_tensor(rng, {3, cfg.d}), Q);
    CHECK(vec(a) == vec(b));
    for (std::size_t c = 0; c < cfg.d; ++c) {
      CHECK(a.at(0, c) == a.at(1, c));
    }
  }
  SUBCASE("zero question gives zero output") {
    auto m = make_module(small_config(), 2);
    const auto out = davl::question_attention(m.p.attention[1], testutil::random_tensor(rng, {3, 8}), Tensor::zeros({6, 8}));
    for (double x : out.data()) CHECK(x == 0.0);
  }
  SUBCASE("four heads match independent single-head oracles") {
    for (bool output_map : {true, false}) {
      auto cfg = small_config();
      cfg.N_h = 4;
      cfg.head_output_map = output_map;
      for (int trial = 0; trial < 20; ++trial) {
        auto m = make_module(cfg, 10 + trial);
        const auto X = oracle::random_mat(rng, 5, cfg.d), Q = oracle::random_mat(rng, cfg.N_t, cfg.d);
        const auto out = oracle::from(davl::question_attention(m.p.attention[2], oracle::to_tensor(X), oracle::to_tensor(Q)));
        const auto heads = heads_of(m.p.attention[2]);
        for (std::size_t h = 0; h < 4; ++h) {
          const Mat one = oracle::question_attention({heads[h]}, X, Q);
          for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t c = 0; c < 2; ++c) CHECK(out(i, h * 2 + c) == doctest::Approx(one(i, c)).epsilon(1e-9));
        }
      }
    }
  }
  SUBCASE("heads must tile d") {
    auto m = make_module(small_config(), 3);
    CHECK_THROWS_AS(davl::question_attention(m.p.attention[0], Tensor::zeros({2, 6}), Tensor::zeros({3, 6})), ShapeError);
  }
}

TEST_CASE("index embedding") {
  PrecisionScope scope(Precision::kDouble);
  std::mt19937_64 rng(52);
  const std::vector<std::size_t> sources = {1, 1, 2, 2, 3, 4};
  const auto nodes = oracle::random_mat(rng, 6, 8);
  auto out = davl::apply_index_embedding(Tensor::full({4, 8}, 1.0), oracle::to_tensor(nodes), sources);
  CHECK(vec(out) == nodes.v);

  Mat table(4, 8);
  for (std::size_t r = 1; r < 4; ++r)
    for (std::size_t c = 0; c < 8; ++c) table(r, c) = 1.0;
  out = davl::apply_index_embedding(oracle::to_tensor(table), oracle::to_tensor(nodes), sources);
  for (std::size_t c = 0; c < 8; ++c) {
    CHECK(out.at(0, c) == 0.0);
    CHECK(out.at(1, c) == 0.0);
    CHECK(out.at(2, c) == nodes(2, c));
  }
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = oracle::random_mat(rng, 4, 8), v = oracle::random_mat(rng, 6, 8);
    out = davl::apply_index_embedding(oracle::to_tensor(t), oracle::to_tensor(v), sources);
    CHECK(oracle::max_rel_diff(vec(out), oracle::index_embedding(t, v, sources).v) <= 1e-12);
  }
  const std::vector<std::size_t> bad = {1, 1, 2, 2, 3, 5};
  CHECK_THROWS_AS(davl::apply_index_embedding(Tensor::full({4, 8}, 1.0), oracle::to_tensor(nodes), bad), ContractError);
}

TEST_CASE("bundle source ids follow the stacking order") {
  const davl::RepresentationBundle b{Tensor::zeros({2, 3}), Tensor::zeros({2, 3}), Tensor::zeros({1, 3}),
                                     Tensor::zeros({1, 3})};
  CHECK(b.rows() == 6);
  CHECK(b.sources() == std::vector<std::size_t>{1, 1, 2, 2, 3, 4});
}

TEST_CASE("all-ones index table reduces DAVL to RI_GCN exactly") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    const auto cfg = small_config();
    auto m = make_module(cfg, 20 + trial, false);
    const auto in = random_inputs(rng, cfg);
    const auto a = davl::integrate(m.p, in.bundle(), oracle::to_tensor(in.Q), RiVariant::kDavl);
    const auto b = davl::integrate(m.p, in.bundle(), oracle::to_tensor(in.Q), RiVariant::kRiGcn);
    CHECK(vec(a) == vec(b));
  }
}

TEST_CASE("messageless DAVL pools the rectified modulated nodes") {
  PrecisionScope scope(Precision::kDouble);
  std::mt19937_64 rng(54);
  const auto cfg = small_config();
  auto m = make_module(cfg, 4);
  for (auto& x : m.p.gcn[0].mutable_data()) x = 0.0;
  const auto in = random_inputs(rng, cfg);
  const auto b = in.bundle();
  const auto modulated =
      oracle::index_embedding(oracle::from(m.p.index_table), attended(m.p, in), b.sources());
  std::vector<double> expect(cfg.d, 0.0);
  for (std::size_t i = 0; i < modulated.rows; ++i)
    for (std::size_t c = 0; c < cfg.d; ++c) expect[c] += std::max(modulated(i, c), 0.0) / static_cast<double>(modulated.rows);
  CHECK(oracle::max_rel_diff(vec(davl::integrate(m.p, b, oracle::to_tensor(in.Q), RiVariant::kDavl)), expect) <= 1e-12);
}

TEST_CASE("DAVL and RI_GCN match the composition oracle") {
  PrecisionScope scope(Precision::kDouble);
  std::mt19937_64 rng(55);
  for (bool normalize : {true, false}) {
    for (int trial = 0; trial < 20; ++trial) {
      auto cfg = small_config();
      cfg.davl_normalize_messages = normalize;
      auto m = make_module(cfg, 40 + trial);
      const auto in = random_inputs(rng, cfg);
      const Mat table = oracle::from(m.p.index_table);
      const auto W1 = oracle::from(m.p.W1), W2 = oracle::from(m.p.W2), W = oracle::from(m.p.gcn[0]);
      const auto got = davl::integrate(m.p, in.bundle(), oracle::to_tensor(in.Q), RiVariant::kDavl);
      CHECK(oracle::max_rel_diff(vec(got), oracle::davl(all_heads(m.p), in.sources, in.Q, &table, W1, W2, W, cfg.N_n,
                                                         normalize)) <= 1e-6);
      const auto plain = davl::integrate(m.p, in.bundle(), oracle::to_tensor(in.Q), RiVariant::kRiGcn);
      CHECK(oracle::max_rel_diff(vec(plain), oracle::davl(all_heads(m.p), in.sources, in.Q, nullptr, W1, W2, W,
                                                           cfg.N_n, normalize)) <= 1e-6);
    }
  }
}

TEST_CASE("baseline variants match their oracles") {
  PrecisionScope scope(Precision::kDouble);
  std::mt19937_64 rng(56);
  for (int trial = 0; trial < 20; ++trial) {
    auto cfg = small_config(RiVariant::kRiConcat);
    auto m = make_module(cfg, 60 + trial);
    const auto in = random_inputs(rng, cfg);
    std::vector<double> pooled;
    for (std::size_t s = 0; s < 4; ++s) {
      const auto part = oracle::mean_rows(oracle::question_attention(heads_of(m.p.attention[s]), in.sources[s], in.Q));
      pooled.insert(pooled.end(), part.begin(), part.end());
    }
    Mat row(1, pooled.size());
    row.v = pooled;
    const auto expect = oracle::affine(row, oracle::from(m.p.concat_W), vec(m.p.concat_b));
    CHECK(oracle::max_rel_diff(vec(davl::integrate(m.p, in.bundle(), oracle::to_tensor(in.Q), RiVariant::kRiConcat)),
                               expect.v) <= 1e-6);

    cfg = small_config(RiVariant::kRiAt);
    auto at = make_module(cfg, 80 + trial);
    CHECK(oracle::max_rel_diff(vec(davl::integrate(at.p, in.bundle(), oracle::to_tensor(in.Q), RiVariant::kRiAt)),
                               co_attention_oracle(attended(at.p, in))) <= 1e-6);
  }
}

TEST_CASE("every variant yields a d-vector") {
  std::mt19937_64 rng(57);
  for (auto v : {RiVariant::kDavl, RiVariant::kRiGcn, RiVariant::kRiAt, RiVariant::kRiConcat}) {
    const auto cfg = small_config(v);
    auto m = make_module(cfg, 5);
    const auto in = random_inputs(rng, cfg);
    CHECK(davl::integrate(m.p, in.bundle(), oracle::to_tensor(in.Q), v).shape() == Shape{cfg.d});
  }
  auto m = make_module(small_config(RiVariant::kRiAt), 6);
  const auto in = random_inputs(rng, small_config());
  CHECK_THROWS_AS(davl::integrate(m.p, in.bundle(), oracle::to_tensor(in.Q), RiVariant::kDavl), ConfigError);
  CHECK_THROWS_AS(davl::integrate(m.p, in.bundle(), oracle::to_tensor(in.Q), RiVariant::kRiConcat), ConfigError);
}

TEST_CASE("zeroed index row removes that source's influence") {
  std::mt19937_64 rng(58);
  const auto cfg = small_config();
  auto m = make_module(cfg, 7);
  auto table = m.p.index_table.mutable_data();
  for (std::size_t c = 0; c < cfg.d; ++c) table[c] = 0.0;
  auto in = random_inputs(rng, cfg);
  const auto before = davl::integrate(m.p, in.bundle(), oracle::to_tensor(in.Q), RiVariant::kDavl);
  in.sources[0] = oracle::random_mat(rng, cfg.N_f, cfg.d);
  const auto after = davl::integrate(m.p, in.bundle(), oracle::to_tensor(in.Q), RiVariant::kDavl);
  CHECK(vec(before) == vec(after));
}

TEST_CASE("learned integration graph keeps N_n neighbours per node") {
  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 20; ++trial) {
    const auto cfg = small_config();
    auto m = make_module(cfg, 100 + trial);
    const auto in = random_inputs(rng, cfg);
    const auto b = in.bundle();
    const auto nodes = davl::apply_index_embedding(m.p.index_table, davl::attend_sources(m.p, b, oracle::to_tensor(in.Q)),
                                                   b.sources());
    const auto g = graph::learn_adjacency(m.p.W1, m.p.W2, nodes, cfg.N_n);
    for (std::size_t i = 0; i < g.graph.n_nodes; ++i) CHECK(g.graph.neighbor_count(i) == cfg.N_n);
  }
}

TEST_CASE("every variant passes a finite-difference check") {
  for (auto v : {RiVariant::kDavl, RiVariant::kRiGcn, RiVariant::kRiAt, RiVariant::kRiConcat}) {
    CAPTURE(to_string(v));
    std::mt19937_64 rng(60);
    auto cfg = small_config(v);
    auto m = make_module(cfg, 8);
    const auto in = random_inputs(rng, cfg);
    // Inputs are registered too so the check reaches the attended rows.
    m.store.add("input.Q", oracle::to_tensor(in.Q));
    m.store.add("input.Vl", oracle::to_tensor(in.sources[1]));
    const auto b = in.bundle();
    auto fn = [&] {
      return davl::integrate(m.p, {b.X_Vg, m.store.get("input.Vl"), b.X_Lg, b.X_Ll}, m.store.get("input.Q"), v);
    };
    CHECK(testutil::fd_worst(m.store, fn) < 1e-4);
  }
}

}
