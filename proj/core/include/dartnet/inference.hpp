// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>
#include <vector>

#include "dartnet/dataio.hpp"
#include "dartnet/model.hpp"

namespace dartnet {

struct ForecastConfig {
  std::size_t horizon = 1;  // >= 1
  std::size_t top_k = 5;    // tails kept per (head, relation) query
  /// (head, relation) pairs rolled forward. Empty: derived from the last
  /// history snapshot.
  std::vector<std::pair<int, int>> queries;

  void validate() const;
};

/// Tails for one query in descending probability order; ties break toward
/// the smaller entity id. Probabilities are softmax over all entities.
std::vector<std::pair<int, double>> rank_tails(const ModelParams& params, const HistoryState& state,
                                               int head, int relation);

struct ForecastStep {
  Snapshot predicted;  // top-k edges per query, attributes filled from predictions
  std::map<int, std::vector<double>> attributes;  // every entity's predicted vector
};

struct ForecastResult {
  std::vector<ForecastStep> steps;
  HistoryState final_state;  // for continuing the rollout
};

/// Sequential rollout: each step scores every query, keeps the top-k tails
/// as the predicted edges, predicts every entity's attributes, assembles a
/// snapshot from them, and feeds it back into the history. No observed
/// data past the initial state is consumed.
ForecastResult forecast(const std::vector<Snapshot>& history, const HistoryState& state,
                        const ModelParams& params, const ForecastConfig& config);

}  // namespace dartnet
