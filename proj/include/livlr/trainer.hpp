// SPDX-License-Identifier: Apache-2.0
//
// Training loop, evaluation and metrics output.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "livlr/data.hpp"
#include "livlr/model.hpp"

namespace livlr {

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double wall_ms = 0.0;
};

struct TrainOptions {
  std::optional<std::size_t> epochs;  // overrides config().epochs
  std::string metrics_csv;            // written incrementally when non-empty
  std::function<void(const EpochMetrics&)> on_epoch;
  // Checked after each epoch; returning true ends training early.
  std::function<bool(const EpochMetrics&)> stop;
};

// Sample order for one epoch: a Fisher-Yates shuffle seeded by (seed, epoch).
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::size_t epoch);

// Mean loss over each batch, one AdamW step per batch. Loss and accuracy in
// the metrics are the running values over the epoch. A non-finite loss,
// gradient or parameter raises NumericError naming the first offending
// parameter in name order.
std::vector<EpochMetrics> train(LivlrModel& model, const data::Dataset& ds, const TrainOptions& opts = {});

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t samples = 0;
};

EvalResult evaluate(const LivlrModel& model, const data::Dataset& ds);

struct SweepRun {
  std::size_t heads = 0;
  EpochMetrics last;
  double best_acc = 0.0;
};

// Trains a fresh model per head count, everything else held fixed.
std::vector<SweepRun> sweep_heads(const ModelConfig& cfg, const data::Dataset& ds, const std::vector<std::size_t>& values,
                                  const TrainOptions& opts = {},
                                  const std::function<void(const SweepRun&)>& on_run = {});

inline constexpr const char* kMetricsHeader = "epoch,train_loss,train_acc,wall_ms";

}  // namespace livlr
