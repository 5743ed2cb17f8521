// SPDX-License-Identifier: Apache-2.0
#include "dartnet/inference.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace dartnet {

void ForecastConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("forecast: horizon must be >= 1");
  if (top_k < 1) throw std::invalid_argument("forecast: top_k must be >= 1");
}

std::vector<std::pair<int, double>> rank_tails(const ModelParams& params, const HistoryState& state,
                                               int head, int relation) {
  const std::vector<double> logits = tail_logits(params, state, head, relation);
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double acc = 0.0;
  for (double z : logits) acc += std::exp(z - zmax);
  std::vector<std::pair<int, double>> ranked(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    ranked[i] = {static_cast<int>(i), std::exp(logits[i] - zmax) / acc};
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return ranked;
}

ForecastResult forecast(const std::vector<Snapshot>& history, const HistoryState& state,
                        const ModelParams& params, const ForecastConfig& config) {
  config.validate();
  if (!history.empty() && state.current_tick != history.back().timestamp) {
    throw std::invalid_argument("forecast: state at tick " + std::to_string(state.current_tick) +
                                " does not match the history ending at tick " +
                                std::to_string(history.back().timestamp));
  }

  std::vector<std::pair<int, int>> queries = config.queries;
  if (queries.empty()) {
    if (history.empty()) throw std::invalid_argument("forecast: no queries and no history to derive them");
    queries = history.back().head_relation_pairs();
  }
  std::set<std::pair<int, int>> unique(queries.begin(), queries.end());
  queries.assign(unique.begin(), unique.end());
  const std::size_t n = params.config.num_entities;
  for (const auto& [head, relation] : queries) {
    if (head < 0 || static_cast<std::size_t>(head) >= n || relation < 0 ||
        static_cast<std::size_t>(relation) >= params.config.num_relations) {
      throw std::invalid_argument("forecast: query (" + std::to_string(head) + "," +
                                  std::to_string(relation) + ") outside the vocabulary");
    }
  }

  ForecastResult result;
  HistoryState current = state;
  for (std::size_t step = 0; step < config.horizon; ++step) {
    ForecastStep out;
    const std::int64_t tick = current.current_tick + 1;

    for (std::size_t entity = 0; entity < n; ++entity) {
      out.attributes[static_cast<int>(entity)] = predict_attribute(params, current, static_cast<int>(entity));
    }

    std::vector<Event> events;
    for (const auto& [head, relation] : queries) {
      const auto ranked = rank_tails(params, current, head, relation);
      const std::size_t keep = std::min(config.top_k, ranked.size());
      for (std::size_t i = 0; i < keep; ++i) {
        Event e;
        e.head = head;
        e.relation = relation;
        e.tail = ranked[i].first;
        e.attr_head = out.attributes.at(head);
        e.attr_tail = out.attributes.at(e.tail);
        e.timestamp = tick;
        events.push_back(std::move(e));
      }
    }
    out.predicted = make_snapshot(tick, std::move(events));
    current = step_history(params, out.predicted, current);
    result.steps.push_back(std::move(out));
  }
  result.final_state = std::move(current);
  return result;
}

}  // namespace dartnet
