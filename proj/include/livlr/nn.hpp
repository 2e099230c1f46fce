// SPDX-License-Identifier: Apache-2.0
//
// Small dense building blocks composed from the tensor primitives.

#pragma once

#include <string>
#include <vector>

#include "livlr/param_store.hpp"
#include "livlr/tensor.hpp"

namespace livlr::nn {

// x W + b for x of shape [n x in] (or [in]), W [in x out], b [out].
Tensor affine(const Tensor& x, const Tensor& W, const Tensor& b);

// One LSTM direction. Gate blocks are laid out i | f | g | o along the
// 4h axis.
struct LstmParams {
  Tensor Wx;  // [in x 4h]
  Tensor Wh;  // [h x 4h]
  Tensor b;   // [4h]

  std::size_t hidden() const { return Wh.dim(0); }
};

struct BiLstmParams {
  LstmParams forward;
  LstmParams reverse;
};

// Hidden state after the last step, starting from zero state. With
// `reverse` the rows of `seq` are consumed last to first.
Tensor lstm_final_state(const LstmParams& p, const Tensor& seq, bool reverse);

// [forward final state ; reverse final state], extent 2h.
Tensor bilstm_summary(const BiLstmParams& p, const Tensor& seq);

void declare_lstm(std::vector<ParamSpec>& specs, const std::string& prefix, std::size_t in, std::size_t hidden);
void declare_bilstm(std::vector<ParamSpec>& specs, const std::string& prefix, std::size_t in, std::size_t hidden);
LstmParams bind_lstm(ParamStore& store, const std::string& prefix);
BiLstmParams bind_bilstm(ParamStore& store, const std::string& prefix);

}  // namespace livlr::nn
