// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dartnet/dataio.hpp"
#include "dartnet/tape.hpp"

namespace dartnet {

enum class VariantKind { full, decoupled, shared_history, time_independent };

VariantKind variant_from_string(const std::string& name);
std::string to_string(VariantKind variant);

struct ModelConfig {
  std::size_t num_entities = 0;
  std::size_t num_relations = 0;
  std::size_t attr_arity = 1;   // k
  std::size_t embed_dim = 32;   // d
  std::size_t hidden_dim = 200; // m
  VariantKind variant = VariantKind::full;

  void validate() const;
  std::uint64_t hash() const;
};

/// One GRU cell parameter set:
///   z = sigmoid(x Wxz + h Whz + bz)        update gate
///   r = sigmoid(x Wxr + h Whr + br)        reset gate
///   n = tanh(x Wxn + (r . h) Whn + bn)     candidate
///   h' = (1 - z) . n + z . h
struct GruParams {
  Array w_xz, w_hz, b_z;
  Array w_xr, w_hr, b_r;
  Array w_xn, w_hn, b_n;

  static GruParams init(std::size_t input_dim, std::size_t hidden_dim, std::mt19937_64& rng);
  bool allocated() const { return !w_xz.empty(); }
};

/// All learnable weights. The per-variant layout:
///   - full / shared_history: one shared entity table and attribute
///     projection feed both tasks.
///   - decoupled: entity_static/attr_proj serve the interaction task;
///     entity_static_attr/attr_proj_attr are the attribute-task copies.
///   - shared_history: the interaction GRU is not allocated; interaction
///     history reads the attribute history of the head.
///   - time_independent: no GRUs; both heads consume static inputs only.
struct ModelParams {
  ModelConfig config;

  Array entity_static;   // {N, d}
  Array attr_proj;       // {k, d}
  Array relation_table;  // {R, d}
  Array agg_attr_w;      // {3d, d}  neighbor projection, attribute aggregate
  Array agg_inter_w;     // {2d, d}  neighbor projection, interaction aggregate
  GruParams gru_attr;    // input 3d, hidden m
  GruParams gru_inter;   // input 4d, hidden m
  Array head_attr_w, head_attr_b;    // {m+d, k} (time_independent: {d, k})
  Array head_inter_w, head_inter_b;  // {m+2d, N} (time_independent: {2d, N})
  Array entity_static_attr;  // decoupled only, {N, d}
  Array attr_proj_attr;      // decoupled only, {k, d}

  /// Xavier-uniform matrices, zero biases, drawn in named() order.
  static ModelParams init(const ModelConfig& config, std::uint64_t seed);

  /// Deterministically ordered list of the allocated arrays.
  std::vector<std::pair<std::string, Array*>> named();
  std::vector<std::pair<std::string, const Array*>> named() const;
};

/// Hidden-state store carried across ticks. Entries exist only for
/// entities (and entity-relation pairs) observed as heads so far; absent
/// entries read as zero vectors. current_tick is the tick of the last
/// consumed snapshot, -1 initially.
struct HistoryState {
  std::map<int, std::vector<double>> attr_hidden;
  std::map<std::pair<int, int>, std::vector<double>> inter_hidden;
  std::int64_t current_tick = -1;
};

// --- tape-level forward ------------------------------------------------------

struct BoundGru {
  Tensor w_xz, w_hz, b_z;
  Tensor w_xr, w_hr, b_r;
  Tensor w_xn, w_hn, b_n;
};

/// Parameters registered as leaves on one tape.
struct BoundParams {
  const ModelConfig* config = nullptr;
  Tensor entity_static, attr_proj, relation_table;
  Tensor agg_attr_w, agg_inter_w;
  BoundGru gru_attr, gru_inter;
  Tensor head_attr_w, head_attr_b, head_inter_w, head_inter_b;
  Tensor entity_static_attr, attr_proj_attr;
  /// The bound leaves in ModelParams::named() order, for gradient pickup.
  std::vector<Tensor> leaves;

  // Parameter selection per task; identical unless decoupled.
  const Tensor& entity_table_attr_task() const;
  const Tensor& attr_proj_attr_task() const;
};

BoundParams bind_params(Tape& tape, const ModelParams& params, bool requires_grad);

/// Rebuilds the bound view from leaves already on a tape, in
/// ModelParams::named() order. Lets a gradient check treat the whole
/// model as one function of its parameter arrays.
BoundParams assemble_bound(const ModelConfig& config, const std::vector<Tensor>& leaves);

/// Working history whose entries live on the tape, used while unrolling a
/// window inside one differentiation scope.
struct TapeHistory {
  std::map<int, Tensor> attr_hidden;
  std::map<std::pair<int, int>, Tensor> inter_hidden;
  std::int64_t current_tick = -1;
};

TapeHistory to_tape_history(Tape& tape, const HistoryState& state);

/// (c_h ; a W1): static embedding concatenated with the projected
/// attribute vector. Uses the attribute-task parameter copies.
Tensor entity_embedding(Tape& tape, const BoundParams& bp, int entity, const std::vector<double>& attr);

/// Head representation plus the mean projected neighbor (entity;relation)
/// embeddings of its event list; the mean term is a zero vector when the
/// head has no events this tick. Length 3d.
Tensor attribute_aggregate(Tape& tape, const BoundParams& bp, const Snapshot& snapshot, int head);

/// Static-only analogue over (c_t ; e_r) pairs. Length 2d.
Tensor interaction_aggregate(Tape& tape, const BoundParams& bp, const Snapshot& snapshot, int head);

Tensor gru_cell(Tape& tape, const BoundGru& gru, const Tensor& x, const Tensor& h_prev);

/// Advances both histories over one snapshot (functional update; the input
/// state is untouched). Heads update their attribute history; (head,
/// relation) pairs update their interaction history. Everything else is
/// carried over. Ticks must strictly increase; gaps are allowed.
TapeHistory step_history(Tape& tape, const BoundParams& bp, const Snapshot& snapshot,
                         const TapeHistory& history);

/// Next-tick attribute prediction for one entity. Length k.
Tensor predict_attribute(Tape& tape, const BoundParams& bp, const TapeHistory& history, int entity);

/// Unnormalized tail scores for one (head, relation) query. Length N.
Tensor tail_logits(Tape& tape, const BoundParams& bp, const TapeHistory& history, int head, int relation);

// --- value-level wrappers ----------------------------------------------------

HistoryState step_history(const ModelParams& params, const Snapshot& snapshot, const HistoryState& state);
HistoryState roll_history(const ModelParams& params, const std::vector<Snapshot>& snapshots,
                          HistoryState state = {});
std::vector<double> predict_attribute(const ModelParams& params, const HistoryState& state, int entity);
std::vector<double> tail_logits(const ModelParams& params, const HistoryState& state, int head, int relation);

// --- persistence ---------------------------------------------------------

struct Checkpoint {
  ModelParams params;
  NormStats stats;                 // attribute normalization used in training
  std::uint64_t dataset_hash = 0;  // dataset_fingerprint of the training data
};

/// Versioned JSON container with every parameter array and the config
/// hash. Doubles are emitted so they load back bit-exactly.
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);  // throws DataError on mismatch

}  // namespace dartnet
