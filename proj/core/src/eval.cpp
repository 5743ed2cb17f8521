// SPDX-License-Identifier: Apache-2.0
#include "dartnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "dartnet/adam.hpp"
#include "dartnet/inference.hpp"
#include "dartnet/tape.hpp"

namespace dartnet {

namespace {

/// entity -> (tick, attributes) in tick order, over every split.
std::map<int, std::vector<std::pair<std::int64_t, std::vector<double>>>> entity_series(
    const DatasetSplit& dataset) {
  std::map<int, std::vector<std::pair<std::int64_t, std::vector<double>>>> series;
  for (const auto* part : {&dataset.train, &dataset.valid, &dataset.test}) {
    for (const Snapshot& snap : *part) {
      for (const auto& [entity, attrs] : snap.attributes) {
        series[entity].emplace_back(snap.timestamp, attrs);
      }
    }
  }
  for (auto& [entity, points] : series) {
    std::sort(points.begin(), points.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
  }
  return series;
}

double mse_over(const AttrSeries& predictions, const AttrSeries& truth,
                std::map<int, double>* per_entity) {
  double sq = 0.0;
  std::size_t count = 0;
  std::map<int, std::pair<double, std::size_t>> by_entity;
  for (const auto& [key, true_attrs] : truth) {
    const auto it = predictions.find(key);
    if (it == predictions.end()) {
      throw std::invalid_argument("attribute_mse: missing prediction for entity " +
                                  std::to_string(key.first) + " at tick " + std::to_string(key.second));
    }
    if (it->second.size() != true_attrs.size()) {
      throw std::invalid_argument("attribute_mse: arity mismatch at entity " + std::to_string(key.first));
    }
    for (std::size_t i = 0; i < true_attrs.size(); ++i) {
      const double d = it->second[i] - true_attrs[i];
      sq += d * d;
      ++count;
      by_entity[key.first].first += d * d;
      by_entity[key.first].second += 1;
    }
  }
  if (count == 0) throw std::invalid_argument("attribute_mse: empty alignment");
  if (per_entity) {
    for (const auto& [entity, acc] : by_entity) {
      (*per_entity)[entity] = acc.first / static_cast<double>(acc.second);
    }
  }
  return sq / static_cast<double>(count);
}

}  // namespace

double attribute_mse(const AttrSeries& predictions, const AttrSeries& truth) {
  return mse_over(predictions, truth, nullptr);
}

LinkMetrics link_metrics(const std::vector<RankedQuery>& queries,
                         const std::vector<std::size_t>& hits_at) {
  if (queries.empty()) throw std::invalid_argument("link_metrics: no queries");
  LinkMetrics metrics;
  metrics.queries = queries.size();
  for (std::size_t k : hits_at) metrics.hits[k] = 0.0;
  for (const RankedQuery& q : queries) {
    const auto it = std::find(q.ranking.begin(), q.ranking.end(), q.true_tail);
    if (it == q.ranking.end()) {
      throw std::invalid_argument("link_metrics: ranking does not cover true tail " +
                                  std::to_string(q.true_tail));
    }
    const std::size_t rank = static_cast<std::size_t>(it - q.ranking.begin()) + 1;
    metrics.mrr += 1.0 / static_cast<double>(rank);
    for (std::size_t k : hits_at) {
      if (rank <= k) metrics.hits[k] += 1.0;
    }
  }
  metrics.mrr /= static_cast<double>(queries.size());
  for (std::size_t k : hits_at) metrics.hits[k] /= static_cast<double>(queries.size());
  return metrics;
}

std::vector<AttrKey> test_alignment(const DatasetSplit& dataset) {
  std::vector<AttrKey> keys;
  for (const Snapshot& snap : dataset.test) {
    for (const auto& [head, indices] : snap.by_head) keys.emplace_back(head, snap.timestamp);
  }
  return keys;
}

AttrSeries test_truth_raw(const DatasetSplit& dataset) {
  AttrSeries truth;
  for (const Snapshot& snap : dataset.test) {
    for (const auto& [head, indices] : snap.by_head) {
      truth[{head, snap.timestamp}] = denormalize_attr(dataset.stats, snap.attributes.at(head));
    }
  }
  return truth;
}

EvalReport evaluate_model(const ModelParams& params, const DatasetSplit& dataset,
                          const EvalOptions& options) {
  if (options.horizon < 1) throw std::invalid_argument("evaluate_model: horizon must be >= 1");
  EvalReport report;
  report.model = "dartnet/" + to_string(params.config.variant);
  report.horizon = options.horizon;

  AttrSeries pred_raw, pred_norm, truth_raw, truth_norm;
  std::vector<RankedQuery> ranked_queries;

  if (options.horizon == 1) {
    HistoryState state = roll_history(params, dataset.train);
    state = roll_history(params, dataset.valid, std::move(state));
    for (const Snapshot& snap : dataset.test) {
      for (const auto& [head, indices] : snap.by_head) {
        const std::vector<double> pred = predict_attribute(params, state, head);
        const AttrKey key{head, snap.timestamp};
        pred_norm[key] = pred;
        pred_raw[key] = denormalize_attr(dataset.stats, pred);
        truth_norm[key] = snap.attributes.at(head);
        truth_raw[key] = denormalize_attr(dataset.stats, snap.attributes.at(head));
      }
      if (options.link_prediction) {
        for (const Event& e : snap.events) {
          RankedQuery q;
          q.true_tail = e.tail;
          for (const auto& [entity, prob] : rank_tails(params, state, e.head, e.relation)) {
            q.ranking.push_back(entity);
          }
          ranked_queries.push_back(std::move(q));
        }
      }
      state = step_history(params, snap, state);
    }
  } else {
    HistoryState state = roll_history(params, dataset.train);
    state = roll_history(params, dataset.valid, std::move(state));
    ForecastConfig fc;
    fc.horizon = options.horizon;
    fc.top_k = 5;
    const std::vector<Snapshot>& context = dataset.valid.empty() ? dataset.train : dataset.valid;
    const ForecastResult rollout = forecast(context, state, params, fc);
    const std::size_t steps = std::min<std::size_t>(options.horizon, dataset.test.size());
    for (std::size_t i = 0; i < steps; ++i) {
      const Snapshot& snap = dataset.test[i];
      for (const auto& [head, indices] : snap.by_head) {
        const AttrKey key{head, snap.timestamp};
        const auto& pred = rollout.steps[i].attributes.at(head);
        pred_norm[key] = pred;
        pred_raw[key] = denormalize_attr(dataset.stats, pred);
        truth_norm[key] = snap.attributes.at(head);
        truth_raw[key] = denormalize_attr(dataset.stats, snap.attributes.at(head));
      }
    }
  }

  report.attribute_pairs = truth_raw.size();
  report.attribute_mse_raw = mse_over(pred_raw, truth_raw, &report.per_entity_mse);
  report.attribute_mse_normalized = mse_over(pred_norm, truth_norm, nullptr);
  if (!ranked_queries.empty()) report.links = link_metrics(ranked_queries, options.hits_at);
  return report;
}

std::map<int, std::vector<double>> historic_average(const DatasetSplit& dataset) {
  const std::size_t k = dataset.attr_arity();
  std::map<int, std::pair<std::vector<double>, std::size_t>> acc;
  std::vector<double> global(k, 0.0);
  std::size_t global_count = 0;
  for (const Snapshot& snap : dataset.train) {
    for (const auto& [entity, attrs] : snap.attributes) {
      const std::vector<double> raw = denormalize_attr(dataset.stats, attrs);
      auto& [sum, count] = acc[entity];
      if (sum.empty()) sum.assign(k, 0.0);
      for (std::size_t i = 0; i < k; ++i) {
        sum[i] += raw[i];
        global[i] += raw[i];
      }
      ++count;
      ++global_count;
    }
  }
  if (global_count == 0) throw std::invalid_argument("historic_average: train split is empty");
  for (double& v : global) v /= static_cast<double>(global_count);

  std::map<int, std::vector<double>> means;
  for (std::size_t entity = 0; entity < dataset.num_entities(); ++entity) {
    const auto it = acc.find(static_cast<int>(entity));
    if (it == acc.end()) {
      means[static_cast<int>(entity)] = global;
      continue;
    }
    std::vector<double> mean = it->second.first;
    for (double& v : mean) v /= static_cast<double>(it->second.second);
    means[static_cast<int>(entity)] = std::move(mean);
  }
  return means;
}

EvalReport evaluate_historic_average(const DatasetSplit& dataset) {
  const auto means = historic_average(dataset);
  const AttrSeries truth = test_truth_raw(dataset);
  AttrSeries predictions;
  for (const auto& [key, attrs] : truth) {
    const auto it = means.find(key.first);
    predictions[key] = it != means.end() ? it->second : means.begin()->second;
  }
  EvalReport report;
  report.model = "historic_average";
  report.attribute_pairs = truth.size();
  report.attribute_mse_raw = mse_over(predictions, truth, &report.per_entity_mse);
  report.attribute_mse_normalized = report.attribute_mse_raw;
  return report;
}

// --- no-graph GRU baseline ---------------------------------------------------

namespace {

struct BoundBaseline {
  std::vector<BoundGru> cells;
  Tensor head_w, head_b;
  std::vector<Tensor> leaves;
};

BoundBaseline bind_baseline(Tape& tape, const GruBaseline& baseline, bool requires_grad) {
  BoundBaseline bound;
  for (const GruParams& cell : baseline.cells) {
    BoundGru b;
    b.w_xz = tape.leaf(cell.w_xz, requires_grad);
    b.w_hz = tape.leaf(cell.w_hz, requires_grad);
    b.b_z = tape.leaf(cell.b_z, requires_grad);
    b.w_xr = tape.leaf(cell.w_xr, requires_grad);
    b.w_hr = tape.leaf(cell.w_hr, requires_grad);
    b.b_r = tape.leaf(cell.b_r, requires_grad);
    b.w_xn = tape.leaf(cell.w_xn, requires_grad);
    b.w_hn = tape.leaf(cell.w_hn, requires_grad);
    b.b_n = tape.leaf(cell.b_n, requires_grad);
    bound.cells.push_back(b);
    for (const Tensor* t :
         {&b.w_xz, &b.w_hz, &b.b_z, &b.w_xr, &b.w_hr, &b.b_r, &b.w_xn, &b.w_hn, &b.b_n}) {
      bound.leaves.push_back(*t);
    }
  }
  bound.head_w = tape.leaf(baseline.head_w, requires_grad);
  bound.head_b = tape.leaf(baseline.head_b, requires_grad);
  bound.leaves.push_back(bound.head_w);
  bound.leaves.push_back(bound.head_b);
  return bound;
}

std::vector<Array*> baseline_arrays(GruBaseline& baseline) {
  std::vector<Array*> arrays;
  for (GruParams& cell : baseline.cells) {
    for (Array* a : {&cell.w_xz, &cell.w_hz, &cell.b_z, &cell.w_xr, &cell.w_hr, &cell.b_r, &cell.w_xn,
                     &cell.w_hn, &cell.b_n}) {
      arrays.push_back(a);
    }
  }
  arrays.push_back(&baseline.head_w);
  arrays.push_back(&baseline.head_b);
  return arrays;
}

/// Rolls the GRU stack over a sequence of attribute vectors and returns
/// the prediction for the step after the last input.
Tensor baseline_predict(Tape& tape, const BoundBaseline& bound, std::size_t hidden_dim,
                        const std::vector<std::vector<double>>& inputs) {
  std::vector<Tensor> hidden(bound.cells.size());
  for (auto& h : hidden) h = tape.zeros({hidden_dim});
  for (const auto& attrs : inputs) {
    Tensor x = tape.constant({attrs.size()}, attrs);
    for (std::size_t layer = 0; layer < bound.cells.size(); ++layer) {
      hidden[layer] = gru_cell(tape, bound.cells[layer], x, hidden[layer]);
      x = hidden[layer];
    }
  }
  return tape.affine(hidden.back(), bound.head_w, bound.head_b);
}

}  // namespace

GruBaseline train_gru_baseline(const DatasetSplit& dataset, const GruBaselineConfig& config) {
  if (config.layers < 1 || config.layers > 2) {
    throw std::invalid_argument("gru baseline: layers must be 1 or 2");
  }
  const std::size_t k = dataset.attr_arity();
  GruBaseline baseline;
  baseline.config = config;
  baseline.attr_arity = k;
  std::mt19937_64 rng(config.seed);
  for (std::size_t layer = 0; layer < config.layers; ++layer) {
    const std::size_t input = layer == 0 ? k : config.hidden_dim;
    baseline.cells.push_back(GruParams::init(input, config.hidden_dim, rng));
  }
  {
    const double limit = std::sqrt(6.0 / static_cast<double>(config.hidden_dim + k));
    std::uniform_real_distribution<double> dist(-limit, limit);
    baseline.head_w = Array::zeros({config.hidden_dim, k});
    for (double& v : baseline.head_w.values) v = dist(rng);
    baseline.head_b = Array::zeros({k});
  }

  // Training examples: (entity, target index) over the train-range series.
  const std::int64_t train_end = dataset.train.empty() ? -1 : dataset.train.back().timestamp;
  const auto series = entity_series(dataset);
  struct Example {
    int entity;
    std::size_t target;
  };
  std::vector<Example> examples;
  for (const auto& [entity, points] : series) {
    for (std::size_t i = 1; i < points.size(); ++i) {
      if (points[i].first > train_end) break;
      examples.push_back({entity, i});
    }
  }
  if (examples.empty()) throw std::invalid_argument("gru baseline: no training examples");

  AdamState adam;
  {
    std::vector<const Array*> view;
    for (Array* a : baseline_arrays(baseline)) view.push_back(a);
    AdamConfig ac;
    ac.lr = config.lr;
    adam = AdamState(view, ac);
  }
  const std::vector<Array*> arrays = baseline_arrays(baseline);

  std::mt19937_64 shuffle_rng(config.seed ^ 0x6a09e667f3bcc909ull);
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t index : order) {
      const Example& ex = examples[index];
      const auto& points = series.at(ex.entity);
      const std::size_t start = ex.target > config.trunc_len ? ex.target - config.trunc_len : 0;
      std::vector<std::vector<double>> inputs;
      for (std::size_t i = start; i < ex.target; ++i) inputs.push_back(points[i].second);

      Tape tape;
      const BoundBaseline bound = bind_baseline(tape, baseline, true);
      const Tensor pred = baseline_predict(tape, bound, config.hidden_dim, inputs);
      const Tensor loss = tape.mse(pred, tape.constant({k}, points[ex.target].second));
      tape.backward(loss);
      std::vector<std::vector<double>> grads;
      grads.reserve(bound.leaves.size());
      for (const Tensor& leaf : bound.leaves) grads.push_back(tape.grad(leaf));
      clip_global_norm(grads, config.clip_norm);
      if (!adam_step(arrays, grads, adam)) {
        throw std::runtime_error("gru baseline: non-finite gradient");
      }
    }
  }
  return baseline;
}

AttrSeries gru_baseline_predictions(const GruBaseline& baseline, const DatasetSplit& dataset) {
  const auto series = entity_series(dataset);
  std::set<AttrKey> wanted;
  for (const AttrKey& key : test_alignment(dataset)) wanted.insert(key);

  AttrSeries predictions;
  Tape tape;  // inference only; one tape for the whole pass
  const BoundBaseline bound = bind_baseline(tape, baseline, false);
  for (const auto& [entity, points] : series) {
    std::vector<Tensor> hidden(bound.cells.size());
    for (auto& h : hidden) h = tape.zeros({baseline.config.hidden_dim});
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (i > 0 && wanted.count({entity, points[i].first})) {
        const Tensor pred = tape.affine(hidden.back(), bound.head_w, bound.head_b);
        predictions[{entity, points[i].first}] = denormalize_attr(dataset.stats, pred.values());
      }
      Tensor x = tape.constant({points[i].second.size()}, points[i].second);
      for (std::size_t layer = 0; layer < bound.cells.size(); ++layer) {
        hidden[layer] = gru_cell(tape, bound.cells[layer], x, hidden[layer]);
        x = hidden[layer];
      }
    }
  }
  return predictions;
}

EvalReport evaluate_gru_baseline(const GruBaseline& baseline, const DatasetSplit& dataset) {
  const AttrSeries truth = test_truth_raw(dataset);
  AttrSeries predictions = gru_baseline_predictions(baseline, dataset);
  // Entities that never appear before their first test tick have no roll
  // context; they still get a prediction from the zero hidden state.
  for (const auto& [key, attrs] : truth) {
    if (!predictions.count(key)) {
      Tape tape;
      const BoundBaseline bound = bind_baseline(tape, baseline, false);
      const Tensor pred = tape.affine(tape.zeros({baseline.config.hidden_dim}), bound.head_w, bound.head_b);
      predictions[key] = denormalize_attr(dataset.stats, pred.values());
    }
  }
  EvalReport report;
  report.model = "gru_baseline/" + std::to_string(baseline.config.layers) + "layer";
  report.attribute_pairs = truth.size();
  report.attribute_mse_raw = mse_over(predictions, truth, &report.per_entity_mse);
  report.attribute_mse_normalized = report.attribute_mse_raw;
  return report;
}

}  // namespace dartnet
