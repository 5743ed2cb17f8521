// SPDX-License-Identifier: Apache-2.0
#include "dartnet/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace dartnet {

namespace {

Array xavier(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Array a = Array::zeros({rows, cols});
  for (double& v : a.values) v = dist(rng);
  return a;
}

void check_entity(const ModelConfig& config, int entity) {
  if (entity < 0 || static_cast<std::size_t>(entity) >= config.num_entities) {
    throw std::invalid_argument("entity id " + std::to_string(entity) + " outside vocabulary of " +
                                std::to_string(config.num_entities));
  }
}

void check_relation(const ModelConfig& config, int relation) {
  if (relation < 0 || static_cast<std::size_t>(relation) >= config.num_relations) {
    throw std::invalid_argument("relation id " + std::to_string(relation) + " outside vocabulary of " +
                                std::to_string(config.num_relations));
  }
}

Tensor hidden_or_zero(Tape& tape, const std::map<int, Tensor>& store, int key, std::size_t m) {
  const auto it = store.find(key);
  return it != store.end() ? it->second : tape.zeros({m});
}

}  // namespace

VariantKind variant_from_string(const std::string& name) {
  if (name == "full") return VariantKind::full;
  if (name == "decoupled") return VariantKind::decoupled;
  if (name == "shared_history") return VariantKind::shared_history;
  if (name == "time_independent") return VariantKind::time_independent;
  throw std::invalid_argument("unknown variant '" + name + "'");
}

std::string to_string(VariantKind variant) {
  switch (variant) {
    case VariantKind::full: return "full";
    case VariantKind::decoupled: return "decoupled";
    case VariantKind::shared_history: return "shared_history";
    case VariantKind::time_independent: return "time_independent";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (num_entities == 0 || num_relations == 0 || attr_arity == 0 || embed_dim == 0 || hidden_dim == 0) {
    throw std::invalid_argument("model config: all dimensions must be positive");
  }
}

std::uint64_t ModelConfig::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  const auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  mix(num_entities);
  mix(num_relations);
  mix(attr_arity);
  mix(embed_dim);
  mix(hidden_dim);
  mix(static_cast<std::uint64_t>(variant));
  return h;
}

GruParams GruParams::init(std::size_t input_dim, std::size_t hidden_dim, std::mt19937_64& rng) {
  GruParams g;
  g.w_xz = xavier(input_dim, hidden_dim, rng);
  g.w_hz = xavier(hidden_dim, hidden_dim, rng);
  g.b_z = Array::zeros({hidden_dim});
  g.w_xr = xavier(input_dim, hidden_dim, rng);
  g.w_hr = xavier(hidden_dim, hidden_dim, rng);
  g.b_r = Array::zeros({hidden_dim});
  g.w_xn = xavier(input_dim, hidden_dim, rng);
  g.w_hn = xavier(hidden_dim, hidden_dim, rng);
  g.b_n = Array::zeros({hidden_dim});
  return g;
}

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  const std::size_t n = config.num_entities;
  const std::size_t r = config.num_relations;
  const std::size_t k = config.attr_arity;
  const std::size_t d = config.embed_dim;
  const std::size_t m = config.hidden_dim;
  const bool temporal = config.variant != VariantKind::time_independent;

  ModelParams p;
  p.config = config;
  p.entity_static = xavier(n, d, rng);
  p.attr_proj = xavier(k, d, rng);
  p.relation_table = xavier(r, d, rng);
  p.agg_attr_w = xavier(3 * d, d, rng);
  p.agg_inter_w = xavier(2 * d, d, rng);
  if (temporal) {
    p.gru_attr = GruParams::init(3 * d, m, rng);
    if (config.variant != VariantKind::shared_history) {
      p.gru_inter = GruParams::init(4 * d, m, rng);
    }
  }
  const std::size_t attr_in = temporal ? m + d : d;
  const std::size_t inter_in = temporal ? m + 2 * d : 2 * d;
  p.head_attr_w = xavier(attr_in, k, rng);
  p.head_attr_b = Array::zeros({k});
  p.head_inter_w = xavier(inter_in, n, rng);
  p.head_inter_b = Array::zeros({n});
  if (config.variant == VariantKind::decoupled) {
    p.entity_static_attr = xavier(n, d, rng);
    p.attr_proj_attr = xavier(k, d, rng);
  }
  return p;
}

std::vector<std::pair<std::string, Array*>> ModelParams::named() {
  std::vector<std::pair<std::string, Array*>> out = {
      {"entity_static", &entity_static},   {"attr_proj", &attr_proj},
      {"relation_table", &relation_table}, {"agg_attr_w", &agg_attr_w},
      {"agg_inter_w", &agg_inter_w},
  };
  const auto add_gru = [&out](const std::string& prefix, GruParams& g) {
    if (!g.allocated()) return;
    out.emplace_back(prefix + ".w_xz", &g.w_xz);
    out.emplace_back(prefix + ".w_hz", &g.w_hz);
    out.emplace_back(prefix + ".b_z", &g.b_z);
    out.emplace_back(prefix + ".w_xr", &g.w_xr);
    out.emplace_back(prefix + ".w_hr", &g.w_hr);
    out.emplace_back(prefix + ".b_r", &g.b_r);
    out.emplace_back(prefix + ".w_xn", &g.w_xn);
    out.emplace_back(prefix + ".w_hn", &g.w_hn);
    out.emplace_back(prefix + ".b_n", &g.b_n);
  };
  add_gru("gru_attr", gru_attr);
  add_gru("gru_inter", gru_inter);
  out.emplace_back("head_attr_w", &head_attr_w);
  out.emplace_back("head_attr_b", &head_attr_b);
  out.emplace_back("head_inter_w", &head_inter_w);
  out.emplace_back("head_inter_b", &head_inter_b);
  if (!entity_static_attr.empty()) {
    out.emplace_back("entity_static_attr", &entity_static_attr);
    out.emplace_back("attr_proj_attr", &attr_proj_attr);
  }
  return out;
}

std::vector<std::pair<std::string, const Array*>> ModelParams::named() const {
  std::vector<std::pair<std::string, const Array*>> out;
  for (auto& [name, array] : const_cast<ModelParams*>(this)->named()) out.emplace_back(name, array);
  return out;
}

const Tensor& BoundParams::entity_table_attr_task() const {
  return config->variant == VariantKind::decoupled ? entity_static_attr : entity_static;
}

const Tensor& BoundParams::attr_proj_attr_task() const {
  return config->variant == VariantKind::decoupled ? attr_proj_attr : attr_proj;
}

BoundParams assemble_bound(const ModelConfig& config, const std::vector<Tensor>& leaves) {
  const bool temporal = config.variant != VariantKind::time_independent;
  const bool has_inter_gru = temporal && config.variant != VariantKind::shared_history;
  const bool decoupled = config.variant == VariantKind::decoupled;
  const std::size_t expected = 9 + (temporal ? 9 : 0) + (has_inter_gru ? 9 : 0) + (decoupled ? 2 : 0);
  if (leaves.size() != expected) {
    throw std::invalid_argument("assemble_bound: expected " + std::to_string(expected) +
                                " leaves, got " + std::to_string(leaves.size()));
  }
  BoundParams bp;
  bp.config = &config;
  bp.leaves = leaves;
  std::size_t i = 0;
  bp.entity_static = leaves[i++];
  bp.attr_proj = leaves[i++];
  bp.relation_table = leaves[i++];
  bp.agg_attr_w = leaves[i++];
  bp.agg_inter_w = leaves[i++];
  const auto take_gru = [&leaves, &i]() {
    BoundGru g;
    g.w_xz = leaves[i++];
    g.w_hz = leaves[i++];
    g.b_z = leaves[i++];
    g.w_xr = leaves[i++];
    g.w_hr = leaves[i++];
    g.b_r = leaves[i++];
    g.w_xn = leaves[i++];
    g.w_hn = leaves[i++];
    g.b_n = leaves[i++];
    return g;
  };
  if (temporal) bp.gru_attr = take_gru();
  if (has_inter_gru) bp.gru_inter = take_gru();
  bp.head_attr_w = leaves[i++];
  bp.head_attr_b = leaves[i++];
  bp.head_inter_w = leaves[i++];
  bp.head_inter_b = leaves[i++];
  if (decoupled) {
    bp.entity_static_attr = leaves[i++];
    bp.attr_proj_attr = leaves[i++];
  }
  return bp;
}

BoundParams bind_params(Tape& tape, const ModelParams& params, bool requires_grad) {
  std::vector<Tensor> leaves;
  for (const auto& [name, array] : params.named()) {
    leaves.push_back(tape.leaf(*array, requires_grad));
  }
  BoundParams bp = assemble_bound(params.config, leaves);
  bp.config = &params.config;
  return bp;
}

TapeHistory to_tape_history(Tape& tape, const HistoryState& state) {
  TapeHistory history;
  history.current_tick = state.current_tick;
  for (const auto& [entity, hidden] : state.attr_hidden) {
    history.attr_hidden.emplace(entity, tape.constant({hidden.size()}, hidden));
  }
  for (const auto& [key, hidden] : state.inter_hidden) {
    history.inter_hidden.emplace(key, tape.constant({hidden.size()}, hidden));
  }
  return history;
}

Tensor entity_embedding(Tape& tape, const BoundParams& bp, int entity, const std::vector<double>& attr) {
  check_entity(*bp.config, entity);
  if (attr.size() != bp.config->attr_arity) {
    throw std::invalid_argument("attribute arity " + std::to_string(attr.size()) + " does not match " +
                                std::to_string(bp.config->attr_arity));
  }
  const Tensor c = tape.row(bp.entity_table_attr_task(), static_cast<std::size_t>(entity));
  const Tensor dynamic = tape.matmul(tape.constant({attr.size()}, attr), bp.attr_proj_attr_task());
  return tape.concat({c, dynamic});
}

namespace {

struct NeighborLists {
  std::vector<std::size_t> tails;
  std::vector<std::size_t> relations;
  std::vector<double> tail_attrs;  // row-major {deg, k}
};

NeighborLists neighbor_lists(const BoundParams& bp, const Snapshot& snapshot, int head) {
  NeighborLists lists;
  const auto it = snapshot.by_head.find(head);
  if (it == snapshot.by_head.end()) return lists;
  for (std::size_t index : it->second) {
    const Event& e = snapshot.events[index];
    check_entity(*bp.config, e.tail);
    check_relation(*bp.config, e.relation);
    lists.tails.push_back(static_cast<std::size_t>(e.tail));
    lists.relations.push_back(static_cast<std::size_t>(e.relation));
    lists.tail_attrs.insert(lists.tail_attrs.end(), e.attr_tail.begin(), e.attr_tail.end());
  }
  return lists;
}

}  // namespace

Tensor attribute_aggregate(Tape& tape, const BoundParams& bp, const Snapshot& snapshot, int head) {
  check_entity(*bp.config, head);
  const std::size_t d = bp.config->embed_dim;
  const auto attr_it = snapshot.attributes.find(head);
  const std::vector<double> head_attr = attr_it != snapshot.attributes.end()
                                            ? attr_it->second
                                            : std::vector<double>(bp.config->attr_arity, 0.0);
  const Tensor e_head = entity_embedding(tape, bp, head, head_attr);

  const NeighborLists lists = neighbor_lists(bp, snapshot, head);
  Tensor mean;
  if (lists.tails.empty()) {
    mean = tape.zeros({d});
  } else {
    const std::size_t deg = lists.tails.size();
    const Tensor c_rows = tape.rows(bp.entity_table_attr_task(), lists.tails);
    const Tensor attr_rows = tape.constant({deg, bp.config->attr_arity}, lists.tail_attrs);
    const Tensor d_rows = tape.matmul(attr_rows, bp.attr_proj_attr_task());
    const Tensor r_rows = tape.rows(bp.relation_table, lists.relations);
    const Tensor projected = tape.matmul(tape.concat({c_rows, d_rows, r_rows}), bp.agg_attr_w);
    mean = tape.mean_rows(projected);
  }
  return tape.concat({e_head, mean});
}

Tensor interaction_aggregate(Tape& tape, const BoundParams& bp, const Snapshot& snapshot, int head) {
  check_entity(*bp.config, head);
  const std::size_t d = bp.config->embed_dim;
  const Tensor c_head = tape.row(bp.entity_static, static_cast<std::size_t>(head));

  const NeighborLists lists = neighbor_lists(bp, snapshot, head);
  Tensor mean;
  if (lists.tails.empty()) {
    mean = tape.zeros({d});
  } else {
    const Tensor c_rows = tape.rows(bp.entity_static, lists.tails);
    const Tensor r_rows = tape.rows(bp.relation_table, lists.relations);
    const Tensor projected = tape.matmul(tape.concat({c_rows, r_rows}), bp.agg_inter_w);
    mean = tape.mean_rows(projected);
  }
  return tape.concat({c_head, mean});
}

Tensor gru_cell(Tape& tape, const BoundGru& gru, const Tensor& x, const Tensor& h_prev) {
  const Tensor z = tape.sigmoid(
      tape.add(tape.add(tape.matmul(x, gru.w_xz), tape.matmul(h_prev, gru.w_hz)), gru.b_z));
  const Tensor r = tape.sigmoid(
      tape.add(tape.add(tape.matmul(x, gru.w_xr), tape.matmul(h_prev, gru.w_hr)), gru.b_r));
  const Tensor n = tape.tanh(tape.add(
      tape.add(tape.matmul(x, gru.w_xn), tape.matmul(tape.hadamard(r, h_prev), gru.w_hn)), gru.b_n));
  // (1 - z) . n + z . h  ==  n + z . (h - n)
  const Tensor h_minus_n = tape.add(h_prev, tape.scale(n, -1.0));
  return tape.add(n, tape.hadamard(z, h_minus_n));
}

TapeHistory step_history(Tape& tape, const BoundParams& bp, const Snapshot& snapshot,
                         const TapeHistory& history) {
  if (snapshot.timestamp <= history.current_tick) {
    throw std::invalid_argument("step_history: tick " + std::to_string(snapshot.timestamp) +
                                " does not advance past " + std::to_string(history.current_tick));
  }
  TapeHistory next = history;  // carry over unobserved entries unchanged
  next.current_tick = snapshot.timestamp;
  if (bp.config->variant == VariantKind::time_independent) return next;

  const std::size_t m = bp.config->hidden_dim;
  for (const auto& [head, indices] : snapshot.by_head) {
    const Tensor aggregate = attribute_aggregate(tape, bp, snapshot, head);
    const Tensor prev = hidden_or_zero(tape, history.attr_hidden, head, m);
    next.attr_hidden[head] = gru_cell(tape, bp.gru_attr, aggregate, prev);
  }
  if (bp.config->variant == VariantKind::shared_history) return next;

  for (const auto& [head, relation] : snapshot.head_relation_pairs()) {
    const Tensor aggregate = interaction_aggregate(tape, bp, snapshot, head);
    const Tensor c_head = tape.row(bp.entity_static, static_cast<std::size_t>(head));
    const Tensor e_rel = tape.row(bp.relation_table, static_cast<std::size_t>(relation));
    const Tensor x = tape.concat({aggregate, c_head, e_rel});
    const auto it = history.inter_hidden.find({head, relation});
    const Tensor prev = it != history.inter_hidden.end() ? it->second : tape.zeros({m});
    next.inter_hidden[{head, relation}] = gru_cell(tape, bp.gru_inter, x, prev);
  }
  return next;
}

Tensor predict_attribute(Tape& tape, const BoundParams& bp, const TapeHistory& history, int entity) {
  check_entity(*bp.config, entity);
  const Tensor c = tape.row(bp.entity_table_attr_task(), static_cast<std::size_t>(entity));
  Tensor input;
  if (bp.config->variant == VariantKind::time_independent) {
    input = c;
  } else {
    const Tensor hidden = hidden_or_zero(tape, history.attr_hidden, entity, bp.config->hidden_dim);
    input = tape.concat({hidden, c});
  }
  return tape.affine(input, bp.head_attr_w, bp.head_attr_b);
}

Tensor tail_logits(Tape& tape, const BoundParams& bp, const TapeHistory& history, int head, int relation) {
  check_entity(*bp.config, head);
  check_relation(*bp.config, relation);
  const Tensor c = tape.row(bp.entity_static, static_cast<std::size_t>(head));
  const Tensor e_rel = tape.row(bp.relation_table, static_cast<std::size_t>(relation));
  Tensor input;
  switch (bp.config->variant) {
    case VariantKind::time_independent:
      input = tape.concat({c, e_rel});
      break;
    case VariantKind::shared_history: {
      const Tensor hidden = hidden_or_zero(tape, history.attr_hidden, head, bp.config->hidden_dim);
      input = tape.concat({hidden, c, e_rel});
      break;
    }
    default: {
      const auto it = history.inter_hidden.find({head, relation});
      const Tensor hidden =
          it != history.inter_hidden.end() ? it->second : tape.zeros({bp.config->hidden_dim});
      input = tape.concat({hidden, c, e_rel});
      break;
    }
  }
  return tape.affine(input, bp.head_inter_w, bp.head_inter_b);
}

HistoryState step_history(const ModelParams& params, const Snapshot& snapshot, const HistoryState& state) {
  Tape tape;
  const BoundParams bp = bind_params(tape, params, false);

  // Seed only the entries the snapshot touches; the rest carries over by value.
  TapeHistory scratch;
  scratch.current_tick = state.current_tick;
  for (const auto& [head, indices] : snapshot.by_head) {
    const auto it = state.attr_hidden.find(head);
    if (it != state.attr_hidden.end()) {
      scratch.attr_hidden.emplace(head, tape.constant({it->second.size()}, it->second));
    }
  }
  for (const auto& [head, relation] : snapshot.head_relation_pairs()) {
    const auto it = state.inter_hidden.find({head, relation});
    if (it != state.inter_hidden.end()) {
      scratch.inter_hidden.emplace(std::pair{head, relation},
                                   tape.constant({it->second.size()}, it->second));
    }
  }

  const TapeHistory updated = step_history(tape, bp, snapshot, scratch);
  HistoryState next = state;
  next.current_tick = updated.current_tick;
  for (const auto& [entity, tensor] : updated.attr_hidden) next.attr_hidden[entity] = tensor.values();
  for (const auto& [key, tensor] : updated.inter_hidden) next.inter_hidden[key] = tensor.values();
  return next;
}

HistoryState roll_history(const ModelParams& params, const std::vector<Snapshot>& snapshots,
                          HistoryState state) {
  for (const Snapshot& snap : snapshots) state = step_history(params, snap, state);
  return state;
}

std::vector<double> predict_attribute(const ModelParams& params, const HistoryState& state, int entity) {
  Tape tape;
  const BoundParams bp = bind_params(tape, params, false);
  TapeHistory scratch;
  scratch.current_tick = state.current_tick;
  const auto it = state.attr_hidden.find(entity);
  if (it != state.attr_hidden.end()) {
    scratch.attr_hidden.emplace(entity, tape.constant({it->second.size()}, it->second));
  }
  return predict_attribute(tape, bp, scratch, entity).values();
}

std::vector<double> tail_logits(const ModelParams& params, const HistoryState& state, int head, int relation) {
  Tape tape;
  const BoundParams bp = bind_params(tape, params, false);
  TapeHistory scratch;
  scratch.current_tick = state.current_tick;
  if (params.config.variant == VariantKind::shared_history) {
    const auto it = state.attr_hidden.find(head);
    if (it != state.attr_hidden.end()) {
      scratch.attr_hidden.emplace(head, tape.constant({it->second.size()}, it->second));
    }
  } else {
    const auto it = state.inter_hidden.find({head, relation});
    if (it != state.inter_hidden.end()) {
      scratch.inter_hidden.emplace(std::pair{head, relation},
                                   tape.constant({it->second.size()}, it->second));
    }
  }
  return tail_logits(tape, bp, scratch, head, relation).values();
}

// --- persistence ---------------------------------------------------------

namespace {

constexpr int kCheckpointVersion = 1;

nlohmann::json array_to_json(const Array& a) {
  return nlohmann::json{{"shape", a.shape}, {"values", a.values}};
}

Array array_from_json(const nlohmann::json& j) {
  return Array(j.at("shape").get<Shape>(), j.at("values").get<std::vector<double>>());
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  const ModelParams& p = checkpoint.params;
  nlohmann::json j;
  j["format_version"] = kCheckpointVersion;
  j["config"] = {{"num_entities", p.config.num_entities},
                 {"num_relations", p.config.num_relations},
                 {"attr_arity", p.config.attr_arity},
                 {"embed_dim", p.config.embed_dim},
                 {"hidden_dim", p.config.hidden_dim},
                 {"variant", to_string(p.config.variant)}};
  j["config_hash"] = p.config.hash();
  j["dataset_hash"] = checkpoint.dataset_hash;
  if (!checkpoint.stats.empty()) {
    j["normalization"] = {{"mean", checkpoint.stats.mean}, {"stddev", checkpoint.stats.stddev}};
  }
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, array] : p.named()) params[name] = array_to_json(*array);
  j["params"] = std::move(params);

  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path + ": " + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != kCheckpointVersion) {
      throw DataError("checkpoint " + path + ": unsupported format version");
    }
    Checkpoint checkpoint;
    const auto& jc = j.at("config");
    ModelConfig config;
    config.num_entities = jc.at("num_entities").get<std::size_t>();
    config.num_relations = jc.at("num_relations").get<std::size_t>();
    config.attr_arity = jc.at("attr_arity").get<std::size_t>();
    config.embed_dim = jc.at("embed_dim").get<std::size_t>();
    config.hidden_dim = jc.at("hidden_dim").get<std::size_t>();
    config.variant = variant_from_string(jc.at("variant").get<std::string>());
    if (j.at("config_hash").get<std::uint64_t>() != config.hash()) {
      throw DataError("checkpoint " + path + ": config hash mismatch");
    }
    checkpoint.dataset_hash = j.value("dataset_hash", std::uint64_t{0});
    if (j.contains("normalization")) {
      checkpoint.stats.mean = j["normalization"].at("mean").get<std::vector<double>>();
      checkpoint.stats.stddev = j["normalization"].at("stddev").get<std::vector<double>>();
    }

    // Re-derive the expected layout, then fill every array from the file.
    checkpoint.params = ModelParams::init(config, 0);
    const auto& stored = j.at("params");
    auto arrays = checkpoint.params.named();
    if (stored.size() != arrays.size()) {
      throw DataError("checkpoint " + path + ": expected " + std::to_string(arrays.size()) +
                      " parameter arrays, found " + std::to_string(stored.size()));
    }
    for (auto& [name, array] : arrays) {
      if (!stored.contains(name)) throw DataError("checkpoint " + path + ": missing array " + name);
      Array loaded = array_from_json(stored.at(name));
      if (loaded.shape != array->shape) {
        throw DataError("checkpoint " + path + ": array " + name + " has shape " + shape_str(loaded.shape) +
                        ", expected " + shape_str(array->shape));
      }
      *array = std::move(loaded);
    }
    return checkpoint;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path + ": " + e.what());
  }
}

}  // namespace dartnet
