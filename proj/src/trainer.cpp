// SPDX-License-Identifier: Apache-2.0
#include "livlr/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "livlr/errors.hpp"
#include "livlr/ops.hpp"

namespace livlr {
namespace {

bool all_finite(std::span<const double> xs) {
  for (double v : xs) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

[[noreturn]] void report_non_finite(const ParamStore& params, const std::string& where) {
  for (const auto& [name, entry] : params) {
    if (!all_finite(entry.value.data())) {
      throw NumericError(where + ": parameter '" + name + "' holds non-finite values");
    }
  }
  for (const auto& [name, entry] : params) {
    if (entry.value.has_grad() && !all_finite(entry.value.grad())) {
      throw NumericError(where + ": gradient of parameter '" + name + "' is non-finite");
    }
  }
  throw NumericError(where + ": every parameter is finite; the sample inputs produce a non-finite loss");
}

std::string format_metrics(const EpochMetrics& m) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu,%.9g,%.6f,%.3f", m.epoch, m.train_loss, m.train_acc, m.wall_ms);
  return buf;
}

}  // namespace

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x5eedu};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  return order;
}

std::vector<EpochMetrics> train(LivlrModel& model, const data::Dataset& ds, const TrainOptions& opts) {
  const auto& cfg = model.config();
  if (ds.samples.empty()) throw DataError("cannot train on an empty dataset");
  for (const auto& s : ds.samples) data::validate_sample(s, cfg);

  std::ofstream csv;
  if (!opts.metrics_csv.empty()) {
    csv.open(opts.metrics_csv);
    if (!csv) throw DataError("cannot write metrics to '" + opts.metrics_csv + "'");
    csv << kMetricsHeader << '\n';
  }

  auto& params = model.params();
  const auto adamw = cfg.adamw();
  const std::size_t epochs = opts.epochs.value_or(cfg.epochs);
  const std::size_t n = ds.samples.size();
  std::vector<EpochMetrics> trace;
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto order = epoch_permutation(n, cfg.seed, epoch);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - begin);
      params.zero_grad();
      for (std::size_t k = begin; k < end; ++k) {
        const auto r = model.forward(ds.samples[order[k]]);
        const double loss = r.loss.item();
        if (!std::isfinite(loss)) {
          clear_tape();
          report_non_finite(params, "epoch " + std::to_string(epoch) + ", sample " + std::to_string(order[k]));
        }
        loss_sum += loss;
        correct += r.prediction == ds.samples[order[k]].label ? 1 : 0;
        backward(ops::scale(r.loss, inv_batch));
      }
      for (const auto& [name, entry] : params) {
        if (!all_finite(entry.value.grad())) report_non_finite(params, "epoch " + std::to_string(epoch));
      }
      adamw_step(params, adamw);
      for (const auto& [name, entry] : params) {
        if (!all_finite(entry.value.data())) report_non_finite(params, "epoch " + std::to_string(epoch) + " update");
      }
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(n);
    m.train_acc = static_cast<double>(correct) / static_cast<double>(n);
    m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (csv.is_open()) csv << format_metrics(m) << '\n' << std::flush;
    if (opts.on_epoch) opts.on_epoch(m);
    trace.push_back(m);
    if (opts.stop && opts.stop(m)) break;
  }
  return trace;
}

EvalResult evaluate(const LivlrModel& model, const data::Dataset& ds) {
  if (ds.samples.empty()) throw DataError("cannot evaluate an empty dataset");
  NoGradGuard no_grad;
  EvalResult r;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (const auto& s : ds.samples) {
    data::validate_sample(s, model.config());
    const auto out = model.forward(s);
    loss_sum += out.loss.item();
    correct += out.prediction == s.label ? 1 : 0;
  }
  r.samples = ds.samples.size();
  r.loss = loss_sum / static_cast<double>(r.samples);
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.samples);
  return r;
}

std::vector<SweepRun> sweep_heads(const ModelConfig& cfg, const data::Dataset& ds, const std::vector<std::size_t>& values,
                                  const TrainOptions& opts, const std::function<void(const SweepRun&)>& on_run) {
  std::vector<SweepRun> runs;
  for (auto heads : values) {
    ModelConfig c = cfg;
    c.N_h = heads;
    LivlrModel model(c);
    SweepRun run;
    run.heads = heads;
    const auto trace = train(model, ds, opts);
    for (const auto& m : trace) run.best_acc = std::max(run.best_acc, m.train_acc);
    if (!trace.empty()) run.last = trace.back();
    if (on_run) on_run(run);
    runs.push_back(run);
  }
  return runs;
}

}  // namespace livlr
