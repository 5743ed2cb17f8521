// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dartnet/dataio.hpp"
#include "dartnet/model.hpp"

namespace dartnet {

struct TrainConfig {
  double lambda = 1.0;       // weight of the attribute loss
  std::size_t epochs = 100;
  double lr = 1e-3;
  std::size_t trunc_len = 10;  // history snapshots unrolled per example
  std::uint64_t seed = 0;
  VariantKind variant = VariantKind::full;
  std::string checkpoint_dir;  // empty: keep results in memory only
  std::size_t eval_every = 5;  // epochs between validation passes
  std::size_t batch_heads = 64;
  double clip_norm = 1.0;      // global gradient norm bound before Adam
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 200;
  std::size_t patience = 20;   // evaluations without improvement before stopping

  void validate() const;
};

struct LossBreakdown {
  double total = 0.0;
  double interaction = 0.0;  // summed cross-entropy over target events
  double attribute = 0.0;    // mean squared error over target heads
};

/// Joint loss over one contiguous window: the history is rolled from zero
/// over every snapshot but the last, and the last snapshot is scored.
/// Needs at least 2 snapshots.
LossBreakdown compute_loss(const std::vector<Snapshot>& window, const ModelParams& params, double lambda);

/// Tape-level form of the window loss. head_subset restricts scoring to
/// those heads of the target snapshot (all when empty); the attribute
/// term averages over the scored heads, the interaction term sums over
/// their events.
Tensor window_loss(Tape& tape, const BoundParams& bp, const std::vector<Snapshot>& window,
                   double lambda, const std::vector<int>& head_subset, LossBreakdown* out);

struct TrainLogRecord {
  std::size_t epoch = 0;
  double total = 0.0;
  double interaction = 0.0;
  double attribute = 0.0;
  double val_mse = std::numeric_limits<double>::quiet_NaN();  // raw units; NaN when skipped
  double wall_seconds = 0.0;
};

struct TrainResult {
  ModelParams best_params;
  std::string best_checkpoint;  // file path when checkpoint_dir is set
  double best_val_mse = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  bool aborted_non_finite = false;
  LossBreakdown initial_loss;
  LossBreakdown final_loss;
  std::vector<TrainLogRecord> log;
};

/// Shuffled sliding-window training with Adam, gradient clipping, periodic
/// validation, and best-checkpoint selection by validation attribute MSE.
/// A non-finite loss or gradient aborts the run; the best checkpoint seen
/// so far is kept.
TrainResult train(const DatasetSplit& dataset, const TrainConfig& config);

/// One-step-ahead attribute MSE over the validation split in raw units:
/// the history is rolled over the full train split, each validation
/// snapshot is scored for its heads and then consumed.
double validation_attribute_mse(const ModelParams& params, const DatasetSplit& dataset);

}  // namespace dartnet
