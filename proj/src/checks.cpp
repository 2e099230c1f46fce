// SPDX-License-Identifier: Apache-2.0
#include "livlr/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "livlr/data.hpp"
#include "livlr/errors.hpp"
#include "livlr/model.hpp"
#include "livlr/ops.hpp"

namespace livlr {
namespace {

// Central differences in double precision carry roughly 1e-11 of roundoff at
// h = 1e-5, so gradients below this scale are compared in absolute terms.
constexpr double kScaleFloor = 1e-6;

}  // namespace

bool GradCheckReport::passed() const {
  return std::all_of(tensors.begin(), tensors.end(), [](const auto& t) { return t.passed; });
}

const TensorGradCheck* GradCheckReport::worst() const {
  const TensorGradCheck* w = nullptr;
  for (const auto& t : tensors) {
    if (!w || t.max_rel_error > w->max_rel_error) w = &t;
  }
  return w;
}

GradCheckReport check_gradients(ParamStore& params, const std::function<Tensor()>& loss_fn, double h,
                                double tolerance) {
  const auto start = std::chrono::steady_clock::now();
  params.zero_grad();
  backward(loss_fn());

  GradCheckReport report;
  report.tolerance = tolerance;
  NoGradGuard no_grad;
  for (auto& [name, entry] : params) {
    auto& value = entry.value;
    const auto analytic = std::vector<double>(value.grad().begin(), value.grad().end());
    auto data = value.mutable_data();
    double max_abs = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + h;
      const double up = loss_fn().item();
      data[i] = saved - h;
      const double down = loss_fn().item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      max_abs = std::max(max_abs, std::abs(numeric - analytic[i]));
      scale = std::max({scale, std::abs(numeric), std::abs(analytic[i])});
    }
    TensorGradCheck t;
    t.name = name;
    t.numel = data.size();
    t.max_abs_error = max_abs;
    t.max_rel_error = max_abs / std::max(scale, kScaleFloor);
    t.passed = std::isfinite(t.max_rel_error) && t.max_rel_error < tolerance;
    report.tensors.push_back(std::move(t));
  }
  report.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return report;
}

GradCheckReport grad_check(const ModelConfig& cfg_in, std::uint64_t seed, double h, double tolerance) {
  ModelConfig cfg = cfg_in;
  cfg.precision = Precision::kDouble;
  cfg.seed = seed;
  LivlrModel model(cfg);

  data::SyntheticTaskSpec spec;
  spec.n_samples = 2;
  spec.signal_source = data::SignalSource::kQuestionDependent;
  spec.noise_scale = 1.0;
  spec.n_classes = cfg.question_setting == QuestionSetting::kMultiChoice ? cfg.N_k : 2;
  spec.seed = seed;
  const auto batch = data::gen_synthetic(spec, cfg);

  auto loss_fn = [&] {
    std::vector<Tensor> losses;
    for (const auto& s : batch.samples) losses.push_back(model.forward(s).loss);
    return ops::scale(ops::sum(ops::concat(losses)), 1.0 / static_cast<double>(losses.size()));
  };
  PrecisionScope scope(Precision::kDouble);
  return check_gradients(model.params(), loss_fn, h, tolerance);
}

ParamCount count_params(const std::vector<ParamSpec>& specs) {
  ParamCount c;
  for (const auto& s : specs) {
    const auto n = shape_numel(s.shape);
    c.by_module[s.name.substr(0, s.name.find('.'))] += n;
    c.total += n;
  }
  return c;
}

ParamCount param_count(const ModelConfig& cfg) { return count_params(param_specs(cfg)); }

}  // namespace livlr
