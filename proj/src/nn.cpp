// SPDX-License-Identifier: Apache-2.0
#include "livlr/nn.hpp"

#include "livlr/errors.hpp"
#include "livlr/ops.hpp"

namespace livlr::nn {

Tensor affine(const Tensor& x, const Tensor& W, const Tensor& b) {
  if (x.rank() == 1) {
    auto y = ops::matmul(ops::reshape(x, {1, x.dim(0)}), W);
    return ops::add(ops::reshape(y, {W.dim(1)}), b);
  }
  return ops::add(ops::matmul(x, W), b);
}

Tensor lstm_final_state(const LstmParams& p, const Tensor& seq, bool reverse) {
  if (seq.rank() != 2 || seq.dim(1) != p.Wx.dim(0)) {
    throw ShapeError("lstm: sequence " + shape_str(seq.shape()) + " does not match input extent " +
                     std::to_string(p.Wx.dim(0)));
  }
  const std::size_t h = p.hidden();
  const std::size_t steps = seq.dim(0);
  // Input contributions for every step at once.
  auto projected = affine(seq, p.Wx, p.b);
  Tensor hidden = Tensor::zeros({1, h});
  Tensor cell = Tensor::zeros({1, h});
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    auto z = ops::add(ops::slice_rows(projected, t, t + 1), ops::matmul(hidden, p.Wh));
    auto gates = ops::reshape(z, {4, h});
    auto in_gate = ops::sigmoid(ops::slice_rows(gates, 0, 1));
    auto forget_gate = ops::sigmoid(ops::slice_rows(gates, 1, 2));
    auto candidate = ops::tanh(ops::slice_rows(gates, 2, 3));
    auto out_gate = ops::sigmoid(ops::slice_rows(gates, 3, 4));
    cell = ops::add(ops::mul(forget_gate, cell), ops::mul(in_gate, candidate));
    hidden = ops::mul(out_gate, ops::tanh(cell));
  }
  return ops::reshape(hidden, {h});
}

Tensor bilstm_summary(const BiLstmParams& p, const Tensor& seq) {
  return ops::concat({lstm_final_state(p.forward, seq, false), lstm_final_state(p.reverse, seq, true)});
}

void declare_lstm(std::vector<ParamSpec>& specs, const std::string& prefix, std::size_t in, std::size_t hidden) {
  specs.push_back({prefix + ".Wx", {in, 4 * hidden}, Init::kUniformFanIn});
  specs.push_back({prefix + ".Wh", {hidden, 4 * hidden}, Init::kUniformFanIn});
  specs.push_back({prefix + ".b", {4 * hidden}, Init::kZeros});
}

void declare_bilstm(std::vector<ParamSpec>& specs, const std::string& prefix, std::size_t in, std::size_t hidden) {
  declare_lstm(specs, prefix + ".fwd", in, hidden);
  declare_lstm(specs, prefix + ".rev", in, hidden);
}

LstmParams bind_lstm(ParamStore& store, const std::string& prefix) {
  return {store.get(prefix + ".Wx"), store.get(prefix + ".Wh"), store.get(prefix + ".b")};
}

BiLstmParams bind_bilstm(ParamStore& store, const std::string& prefix) {
  return {bind_lstm(store, prefix + ".fwd"), bind_lstm(store, prefix + ".rev")};
}

}  // namespace livlr::nn
