// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dartnet/dataio.hpp"
#include "dartnet/model.hpp"

namespace dartnet {

/// Key for aligned attribute predictions: (entity, tick).
using AttrKey = std::pair<int, std::int64_t>;
using AttrSeries = std::map<AttrKey, std::vector<double>>;

/// Mean over all aligned pairs and attribute dimensions of squared error.
/// Throws when the alignment is empty or a prediction is missing.
double attribute_mse(const AttrSeries& predictions, const AttrSeries& truth);

struct RankedQuery {
  int true_tail = 0;
  std::vector<int> ranking;  // all entities, best first
};

struct LinkMetrics {
  double mrr = 0.0;
  std::map<std::size_t, double> hits;  // k -> fraction with rank <= k
  std::size_t queries = 0;
};

/// Raw (unfiltered) ranking metrics; rank is the 1-based position of the
/// true tail.
LinkMetrics link_metrics(const std::vector<RankedQuery>& queries,
                         const std::vector<std::size_t>& hits_at = {1, 3, 10});

struct EvalReport {
  double attribute_mse_raw = 0.0;        // after denormalization
  double attribute_mse_normalized = 0.0; // in model units (equal when data is raw)
  LinkMetrics links;
  std::map<int, double> per_entity_mse;  // raw units
  std::size_t attribute_pairs = 0;
  // metadata
  std::string model;
  std::string dataset;
  std::uint64_t checkpoint_hash = 0;
  std::size_t horizon = 1;
};

struct EvalOptions {
  std::size_t horizon = 1;
  std::vector<std::size_t> hits_at = {1, 3, 10};
  bool link_prediction = true;
};

/// One-step-ahead protocol (horizon 1): the history is rolled over train
/// and valid; each test snapshot is scored for its heads (attributes) and
/// its events (tail ranking) before being consumed. With horizon > 1 the
/// model instead forecasts that many steps past the valid split without
/// observing test data, scoring attributes on the first horizon test
/// snapshots.
EvalReport evaluate_model(const ModelParams& params, const DatasetSplit& dataset,
                          const EvalOptions& options = {});

// --- baselines -------------------------------------------------------------

/// Per-entity mean of the train-split attribute values; entities never
/// seen in train fall back to the global mean. Constant over any horizon.
std::map<int, std::vector<double>> historic_average(const DatasetSplit& dataset);

/// Test attribute MSE of the historic-average predictor, raw units.
EvalReport evaluate_historic_average(const DatasetSplit& dataset);

struct GruBaselineConfig {
  std::size_t hidden_dim = 32;
  std::size_t layers = 1;  // 1 or 2
  std::size_t epochs = 200;
  double lr = 1e-3;
  std::size_t trunc_len = 10;
  std::uint64_t seed = 0;
  double clip_norm = 1.0;
};

/// Attribute-only recurrent predictor: one GRU stack shared across
/// entities, fed each entity's own attribute series, no graph input.
struct GruBaseline {
  GruBaselineConfig config;
  std::size_t attr_arity = 0;
  std::vector<GruParams> cells;  // one per layer
  Array head_w, head_b;
};

GruBaseline train_gru_baseline(const DatasetSplit& dataset, const GruBaselineConfig& config);

/// Teacher-forced next-step predictions at the test alignment keys.
AttrSeries gru_baseline_predictions(const GruBaseline& baseline, const DatasetSplit& dataset);
EvalReport evaluate_gru_baseline(const GruBaseline& baseline, const DatasetSplit& dataset);

/// The (entity, tick) keys scored on the test split: the heads of every
/// test snapshot. All evaluators share this alignment.
std::vector<AttrKey> test_alignment(const DatasetSplit& dataset);

/// Ground-truth attributes at the alignment keys, raw units.
AttrSeries test_truth_raw(const DatasetSplit& dataset);

}  // namespace dartnet
