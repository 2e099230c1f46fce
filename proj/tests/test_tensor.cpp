// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "livlr/errors.hpp"
#include "livlr/ops.hpp"
#include "livlr/param_store.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace livlr;
using testutil::fd_worst;
using testutil::random_tensor;

TEST_SUITE("tensor-core") {

TEST_CASE("matmul values") {
  auto id = Tensor::matrix(2, 2, {1, 0, 0, 1});
  auto col = Tensor::matrix(2, 1, {3, 4});
  auto r = ops::matmul(id, col);
  CHECK(r.at(0, 0) == 3.0);
  CHECK(r.at(1, 0) == 4.0);
  CHECK(ops::matmul(Tensor::matrix(1, 2, {1, 2}), col).item() == 11.0);
  CHECK_THROWS_AS(ops::matmul(col, col), ShapeError);
  try {
    ops::matmul(col, col);
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("[2x1]") != std::string::npos);
  }
}

TEST_CASE("matmul matches a triple loop on random 10x10 cases") {
  PrecisionScope scope(Precision::kDouble);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    auto a = oracle::random_mat(rng, 10, 10), b = oracle::random_mat(rng, 10, 10);
    oracle::Mat expect(10, 10);
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t j = 0; j < 10; ++j)
        for (std::size_t k = 0; k < 10; ++k) expect(i, j) += a(i, k) * b(k, j);
    auto got = ops::matmul(oracle::to_tensor(a), oracle::to_tensor(b));
    CHECK(oracle::max_rel_diff(oracle::from(got).v, expect.v) <= 1e-12);
  }
}

TEST_CASE("row_softmax cases") {
  PrecisionScope scope(Precision::kDouble);
  auto s = ops::row_softmax(Tensor::matrix(1, 2, {0, 0}));
  CHECK(s.at(0, 0) == doctest::Approx(0.5));
  s = ops::row_softmax(Tensor::matrix(1, 2, {1, 0}));
  CHECK(s.at(0, 0) == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(s.at(0, 1) == doctest::Approx(0.2689).epsilon(1e-4));
  Mask m(1, 3);
  m.set(0, 0, true);
  m.set(0, 1, true);
  s = ops::row_softmax(Tensor::matrix(1, 3, {5, 5, 5}), &m);
  CHECK(s.at(0, 0) == doctest::Approx(0.5));
  CHECK(s.at(0, 2) == 0.0);
  Mask none(1, 3);
  CHECK_THROWS_AS(ops::row_softmax(Tensor::matrix(1, 3, {1, 2, 3}), &none), ContractError);
  CHECK(ops::row_softmax(Tensor::matrix(1, 3, {1, 2, 3}), &none, ops::EmptyRow::kZero).at(0, 1) == 0.0);
  // Stabilised: large logits do not overflow.
  s = ops::row_softmax(Tensor::matrix(1, 2, {1000, 999}));
  CHECK(std::isfinite(s.at(0, 0)));
}

TEST_CASE("row_softmax rows sum to one") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = random_tensor(rng, {4, 7}, 3.0);
    auto y = ops::row_softmax(x);
    for (std::size_t i = 0; i < 4; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 7; ++j) {
        CHECK(y.at(i, j) >= 0.0);
        s += y.at(i, j);
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("elementwise suite") {
  auto r = ops::relu(Tensor::vector({-1, 0, 2}));
  CHECK(r.at(0) == 0.0);
  CHECK(r.at(1) == 0.0);
  CHECK(r.at(2) == 2.0);
  auto m = ops::mul(Tensor::vector({1, 2}), Tensor::vector({1, 1}));
  CHECK(m.at(1) == 2.0);
  auto mean = ops::mean_rows(Tensor::matrix(2, 2, {1, 3, 3, 5}));
  CHECK(mean.at(0) == 2.0);
  CHECK(mean.at(1) == 4.0);
  // Scalar and row broadcasts.
  auto a = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(ops::add(a, Tensor::scalar(1)).at(1, 2) == 7.0);
  CHECK(ops::add(a, Tensor::vector({1, 1, 1})).at(0, 0) == 2.0);
  CHECK(ops::sub(Tensor::matrix(1, 3, {0, 0, 0}), a).at(1, 0) == -4.0);
  CHECK_THROWS_AS(ops::add(a, Tensor::vector({1, 1})), ShapeError);
  CHECK_THROWS_AS(ops::add(a, Tensor::matrix(2, 1, {1, 1})), ShapeError);
}

TEST_CASE("relu gradient at zero is zero") {
  auto x = Tensor::from_data({3}, {-1, 0, 2}, true);
  backward(ops::sum(ops::relu(x)));
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 0.0);
  CHECK(x.grad()[2] == 1.0);
}

TEST_CASE("backward semantics") {
  auto w = Tensor::from_data({1}, {3}, true);
  backward(ops::sum(ops::mul(w, w)));
  CHECK(w.grad()[0] == 6.0);
  backward(ops::sum(ops::mul(w, w)));
  CHECK(w.grad()[0] == 12.0);  // accumulated, not overwritten
  CHECK(tape_size() == 0);

  auto v = Tensor::from_data({2}, {1, 2}, true);
  CHECK_THROWS_AS(backward(ops::mul(v, v)), ContractError);
  clear_tape();
  // A result from a cleared tape cannot seed backward.
  auto stale = ops::sum(ops::mul(v, v));
  clear_tape();
  CHECK_THROWS_AS(backward(stale), ContractError);
}

TEST_CASE("leaves and non-leaves") {
  auto w = Tensor::from_data({2}, {1, 2}, true);
  CHECK(w.is_leaf());
  CHECK_FALSE(w.tape_id().has_value());
  CHECK(w.has_grad());
  auto y = ops::scale(w, 2.0);
  CHECK_FALSE(y.is_leaf());
  CHECK(y.tape_id().has_value());
  CHECK_THROWS(y.mutable_data());
  clear_tape();
  {
    NoGradGuard guard;
    auto z = ops::scale(w, 2.0);
    CHECK(z.is_leaf());
    CHECK(tape_size() == 0);
  }
  auto c = ops::scale(Tensor::vector({1, 2}), 2.0);
  CHECK(c.is_leaf());
}

TEST_CASE("tape is topologically ordered") {
  std::mt19937_64 rng(3);
  auto a = random_tensor(rng, {3, 3});
  a.set_requires_grad(true);
  auto y = ops::relu(ops::matmul(ops::add(a, a), ops::transpose(a)));
  y = ops::row_softmax(ops::mul(y, y));
  const auto n = tape_size();
  CHECK(n > 3);
  for (std::size_t k = 0; k < n; ++k) {
    for (auto op : tape_operands(k)) CHECK(op < k);
  }
  clear_tape();
}

TEST_CASE("single precision rounds results to float") {
  auto x = Tensor::vector({1.0 / 3.0});
  auto y = ops::scale(x, 1.0);
  CHECK(y.at(0) == static_cast<double>(static_cast<float>(1.0 / 3.0)));
  PrecisionScope scope(Precision::kDouble);
  CHECK(ops::scale(x, 1.0).at(0) == 1.0 / 3.0);
}

TEST_CASE("matmul chain of depth 5 matches finite differences") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 3; ++trial) {
    ParamStore store;
    std::vector<std::size_t> dims = {2, 3, 4, 2, 5, 3};
    for (std::size_t k = 0; k < 5; ++k) {
      store.add("m" + std::to_string(k), random_tensor(rng, {dims[k], dims[k + 1]}));
    }
    auto fn = [&] {
      Tensor y = store.get("m0");
      for (std::size_t k = 1; k < 5; ++k) y = ops::matmul(y, store.get("m" + std::to_string(k)));
      return y;
    };
    CHECK(fd_worst(store, fn) < 1e-6);
  }
}

TEST_CASE("every primitive passes a finite-difference check on 20 seeds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    ParamStore s;
    s.add("a", random_tensor(rng, {3, 4}));
    s.add("b", random_tensor(rng, {3, 4}));
    s.add("row", random_tensor(rng, {4}));
    s.add("one", random_tensor(rng, {1}));
    s.add("sq", random_tensor(rng, {4, 4}));
    s.add("table", random_tensor(rng, {5}));
    Mask mask(3, 4);
    for (std::size_t i = 0; i < 3; ++i) {
      mask.set(i, i, true);
      mask.set(i, 3, true);
    }
    const std::vector<std::size_t> rows = {2, 0, 2};
    const std::vector<std::int64_t> index = {0, 4, -1, 2, 2, 1};
    auto fn = [&] {
      const auto& a = s.get("a");
      const auto& b = s.get("b");
      std::vector<Tensor> parts = {
          ops::matmul(a, s.get("sq")),
          ops::transpose(ops::transpose(b)),
          ops::add(a, b),
          ops::sub(a, s.get("row")),
          ops::mul(s.get("row"), b),
          ops::add(s.get("one"), a),
          ops::scale(ops::add_scalar(a, 0.5), -1.5),
          ops::tanh(a),
          ops::sigmoid(b),
          ops::mul(ops::relu(a), b),
          ops::row_softmax(ops::mul(a, b)),
          ops::row_softmax(a, &mask),
          ops::concat({ops::slice_rows(a, 0, 2), ops::slice_rows(b, 1, 3)}),
          ops::stack_rows({ops::row(a, 1), b}),
          ops::gather_rows(b, rows),
          ops::reshape(ops::gather(s.get("table"), index, {2, 3}), {3, 2}),
          ops::reshape(ops::mean_rows(a), {1, 4}),
          ops::reshape(ops::sum(b), {1, 1}),
      };
      Tensor total = Tensor::scalar(0.0);
      std::uint64_t k = 0;
      for (const auto& p : parts) total = ops::add(total, testutil::project(p, ++k));
      return total;
    };
    CHECK(fd_worst(s, fn) < 1e-6);
  }
}

TEST_CASE("adamw recurrence") {
  AdamWOptions opt{0.1, 0.9, 0.999, 1e-8, 0.0};
  {
    PrecisionScope scope(Precision::kDouble);
    ParamStore s;
    s.add("w", Tensor::from_data({1}, {0.0}));
    s.get("w").impl().grad = {1.0};
    adamw_step(s, opt);
    CHECK(s.get("w").at(0) == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(s.entry("w").step == 1);
  }
  {
    PrecisionScope scope(Precision::kDouble);
    ParamStore s;
    s.add("w", Tensor::from_data({1}, {1.0}));
    s.get("w").impl().grad = {0.0};
    opt.weight_decay = 0.1;
    adamw_step(s, opt);
    CHECK(s.get("w").at(0) == doctest::Approx(0.99).epsilon(1e-12));
  }
  {
    ParamStore s;
    s.add("w", Tensor::from_data({2}, {0.25, -2.0}));
    s.zero_grad();
    opt.weight_decay = 0.0;
    adamw_step(s, opt);
    CHECK(s.get("w").at(0) == 0.25);
    CHECK(s.get("w").at(1) == -2.0);
  }
  {
    // Two steps against a hand-rolled recurrence.
    PrecisionScope scope(Precision::kDouble);
    ParamStore s;
    s.add("w", Tensor::from_data({1}, {0.5}));
    AdamWOptions o{0.01, 0.8, 0.9, 1e-8, 0.05};
    double theta = 0.5, m = 0.0, v = 0.0;
    for (int t = 1; t <= 2; ++t) {
      const double g = t == 1 ? 0.3 : -0.7;
      s.get("w").impl().grad = {g};
      adamw_step(s, o);
      theta -= o.lr * o.weight_decay * theta;
      m = o.beta1 * m + (1 - o.beta1) * g;
      v = o.beta2 * v + (1 - o.beta2) * g * g;
      const double mh = m / (1 - std::pow(o.beta1, t)), vh = v / (1 - std::pow(o.beta2, t));
      theta -= o.lr * mh / (std::sqrt(vh) + o.eps);
    }
    CHECK(s.get("w").at(0) == doctest::Approx(theta).epsilon(1e-12));
  }
}

TEST_CASE("adamw names a parameter without gradient") {
  ParamStore s;
  s.add("alpha", Tensor::from_data({1}, {0.0}));
  s.get("alpha").impl().grad.clear();
  try {
    adamw_step(s, {});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("alpha") != std::string::npos);
  }
}

TEST_CASE("param store ordering and initialisation") {
  std::vector<ParamSpec> specs = {{"z.W", {4, 3}}, {"a.b", {3}, Init::kZeros}, {"m.idx", {2, 2}, Init::kOnes}};
  ParamStore s1, s2;
  materialize(s1, specs, 7);
  std::vector<ParamSpec> reversed(specs.rbegin(), specs.rend());
  materialize(s2, reversed, 7);
  CHECK(s1.names() == std::vector<std::string>{"a.b", "m.idx", "z.W"});
  for (const auto& name : s1.names()) {
    auto a = s1.get(name).data(), b = s2.get(name).data();
    CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  }
  for (double v : s1.get("z.W").data()) CHECK(std::abs(v) <= 0.5 + 1e-12);
  for (double v : s1.get("a.b").data()) CHECK(v == 0.0);
  for (double v : s1.get("m.idx").data()) CHECK(v == 1.0);
  CHECK(s1.scalar_count() == 12 + 3 + 4);
  CHECK_THROWS_AS(s1.add("a.b", Tensor::zeros({1})), ContractError);
  CHECK_THROWS_AS(s1.get("missing"), ContractError);
}

TEST_CASE("tape replay is bit-identical") {
  auto run = [] {
    std::mt19937_64 rng(11);
    auto a = random_tensor(rng, {3, 3});
    a.set_requires_grad(true);
    auto y = ops::row_softmax(ops::matmul(ops::tanh(a), a));
    backward(testutil::project(y));
    return std::vector<double>(a.grad().begin(), a.grad().end());
  };
  CHECK(run() == run());
}

}
