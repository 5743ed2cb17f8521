// SPDX-License-Identifier: Apache-2.0
#include "dartnet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "dartnet/adam.hpp"
#include "dartnet/log.hpp"

namespace dartnet {

namespace fs = std::filesystem;

Tensor window_loss(Tape& tape, const BoundParams& bp, const std::vector<Snapshot>& window,
                   double lambda, const std::vector<int>& head_subset, LossBreakdown* out) {
  TapeHistory history;
  for (std::size_t i = 0; i + 1 < window.size(); ++i) {
    history = step_history(tape, bp, window[i], history);
  }
  const Snapshot& target = window.back();

  std::vector<int> heads;
  if (head_subset.empty()) {
    for (const auto& [head, indices] : target.by_head) heads.push_back(head);
  } else {
    heads = head_subset;
  }

  // Attribute task: mean squared error over every scored head.
  std::vector<Tensor> preds, truths;
  preds.reserve(heads.size());
  for (int head : heads) {
    preds.push_back(predict_attribute(tape, bp, history, head));
    truths.push_back(tape.constant({target.attributes.at(head).size()}, target.attributes.at(head)));
  }
  Tensor attr_loss;
  if (!preds.empty()) {
    attr_loss = tape.mse(tape.stack_rows(preds), tape.stack_rows(truths));
  } else {
    attr_loss = tape.scalar_constant(0.0);
  }

  // Interaction task: summed cross-entropy over the heads' events.
  Tensor inter_loss = tape.scalar_constant(0.0);
  for (int head : heads) {
    const auto it = target.by_head.find(head);
    if (it == target.by_head.end()) continue;
    for (std::size_t index : it->second) {
      const Event& e = target.events[index];
      const Tensor logits = tail_logits(tape, bp, history, e.head, e.relation);
      inter_loss = tape.add(inter_loss, tape.cross_entropy(logits, static_cast<std::size_t>(e.tail)));
    }
  }

  const Tensor total = tape.add(inter_loss, tape.scale(attr_loss, lambda));
  if (out) {
    out->total = total.scalar();
    out->interaction = inter_loss.scalar();
    out->attribute = attr_loss.scalar();
  }
  return total;
}

namespace {

std::vector<std::vector<Snapshot>> make_windows(const std::vector<Snapshot>& snapshots,
                                                std::size_t trunc_len) {
  std::vector<std::vector<Snapshot>> windows;
  for (std::size_t target = 1; target < snapshots.size(); ++target) {
    const std::size_t start = target > trunc_len ? target - trunc_len : 0;
    windows.emplace_back(snapshots.begin() + static_cast<std::ptrdiff_t>(start),
                         snapshots.begin() + static_cast<std::ptrdiff_t>(target) + 1);
  }
  return windows;
}

LossBreakdown mean_loss_over_windows(const std::vector<std::vector<Snapshot>>& windows,
                                     const ModelParams& params, double lambda) {
  LossBreakdown mean;
  if (windows.empty()) return mean;
  for (const auto& window : windows) {
    const LossBreakdown b = compute_loss(window, params, lambda);
    mean.total += b.total;
    mean.interaction += b.interaction;
    mean.attribute += b.attribute;
  }
  const double n = static_cast<double>(windows.size());
  mean.total /= n;
  mean.interaction /= n;
  mean.attribute /= n;
  return mean;
}

void write_log(const std::string& dir, const std::vector<TrainLogRecord>& log) {
  if (dir.empty()) return;
  std::ofstream out(fs::path(dir) / "train_log.jsonl");
  for (const TrainLogRecord& r : log) {
    nlohmann::json j{{"epoch", r.epoch},
                     {"loss", r.total},
                     {"loss_interaction", r.interaction},
                     {"loss_attribute", r.attribute},
                     {"wall_seconds", r.wall_seconds}};
    if (std::isfinite(r.val_mse)) j["val_mse"] = r.val_mse;
    out << j.dump() << '\n';
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (lambda < 0.0) throw std::invalid_argument("train: lambda must be >= 0");
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (trunc_len < 1) throw std::invalid_argument("train: trunc_len must be >= 1");
  if (eval_every < 1) throw std::invalid_argument("train: eval_every must be >= 1");
  if (batch_heads < 1) throw std::invalid_argument("train: batch_heads must be >= 1");
}

LossBreakdown compute_loss(const std::vector<Snapshot>& window, const ModelParams& params, double lambda) {
  if (window.size() < 2) {
    throw std::invalid_argument("compute_loss: window must hold at least 2 snapshots");
  }
  Tape tape;
  const BoundParams bp = bind_params(tape, params, false);
  LossBreakdown breakdown;
  window_loss(tape, bp, window, lambda, {}, &breakdown);
  return breakdown;
}

double validation_attribute_mse(const ModelParams& params, const DatasetSplit& dataset) {
  HistoryState state = roll_history(params, dataset.train);
  double sq = 0.0;
  std::size_t count = 0;
  for (const Snapshot& snap : dataset.valid) {
    for (const auto& [head, indices] : snap.by_head) {
      const std::vector<double> pred = predict_attribute(params, state, head);
      const std::vector<double> pred_raw = denormalize_attr(dataset.stats, pred);
      const std::vector<double> truth_raw = denormalize_attr(dataset.stats, snap.attributes.at(head));
      for (std::size_t i = 0; i < pred_raw.size(); ++i) {
        const double diff = pred_raw[i] - truth_raw[i];
        sq += diff * diff;
        ++count;
      }
    }
    state = step_history(params, snap, state);
  }
  if (count == 0) throw std::invalid_argument("validation split has no heads to score");
  return sq / static_cast<double>(count);
}

TrainResult train(const DatasetSplit& dataset, const TrainConfig& config) {
  config.validate();
  if (dataset.train.size() < 2) throw std::invalid_argument("train split needs at least 2 snapshots");
  if (dataset.valid.empty()) throw std::invalid_argument("valid split is empty");

  ModelConfig model_config;
  model_config.num_entities = dataset.num_entities();
  model_config.num_relations = dataset.num_relations();
  model_config.attr_arity = dataset.attr_arity();
  model_config.embed_dim = config.embed_dim;
  model_config.hidden_dim = config.hidden_dim;
  model_config.variant = config.variant;

  ModelParams params = ModelParams::init(model_config, config.seed);
  auto named = params.named();
  std::vector<const Array*> param_view;
  std::vector<Array*> param_ptrs;
  for (auto& [name, array] : named) {
    param_view.push_back(array);
    param_ptrs.push_back(array);
  }
  AdamConfig adam_config;
  adam_config.lr = config.lr;
  AdamState adam(param_view, adam_config);

  const auto windows = make_windows(dataset.train, config.trunc_len);
  if (windows.empty()) throw std::invalid_argument("train split yields no windows");

  TrainResult result;
  result.initial_loss = mean_loss_over_windows(windows, params, config.lambda);

  if (!config.checkpoint_dir.empty()) fs::create_directories(config.checkpoint_dir);
  const auto save_best = [&](const ModelParams& best) {
    if (config.checkpoint_dir.empty()) return std::string{};
    Checkpoint checkpoint;
    checkpoint.params = best;
    checkpoint.stats = dataset.stats;
    checkpoint.dataset_hash = dataset_fingerprint(dataset.meta);
    const std::string path = (fs::path(config.checkpoint_dir) / "best.json").string();
    save_checkpoint(checkpoint, path);
    return path;
  };

  std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(windows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const auto start_time = std::chrono::steady_clock::now();
  std::size_t evals_since_best = 0;
  bool stop = false;

  for (std::size_t epoch = 1; epoch <= config.epochs && !stop; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    LossBreakdown epoch_loss;
    std::size_t contributions = 0;

    for (std::size_t index : order) {
      const auto& window = windows[index];
      std::vector<int> heads;
      for (const auto& [head, indices] : window.back().by_head) heads.push_back(head);

      for (std::size_t offset = 0; offset < heads.size(); offset += config.batch_heads) {
        const std::size_t end = std::min(heads.size(), offset + config.batch_heads);
        const std::vector<int> batch(heads.begin() + static_cast<std::ptrdiff_t>(offset),
                                     heads.begin() + static_cast<std::ptrdiff_t>(end));
        Tape tape;
        const BoundParams bp = bind_params(tape, params, true);
        LossBreakdown breakdown;
        const Tensor loss = window_loss(tape, bp, window, config.lambda, batch, &breakdown);
        if (!std::isfinite(breakdown.total)) {
          log_error("training aborted: non-finite loss at epoch " + std::to_string(epoch));
          result.aborted_non_finite = true;
          stop = true;
          break;
        }
        tape.backward(loss);
        std::vector<std::vector<double>> grads;
        grads.reserve(bp.leaves.size());
        for (const Tensor& leaf : bp.leaves) grads.push_back(tape.grad(leaf));
        clip_global_norm(grads, config.clip_norm);
        if (!adam_step(param_ptrs, grads, adam)) {
          log_error("training aborted: non-finite gradient at epoch " + std::to_string(epoch));
          result.aborted_non_finite = true;
          stop = true;
          break;
        }
        epoch_loss.total += breakdown.total;
        epoch_loss.interaction += breakdown.interaction;
        epoch_loss.attribute += breakdown.attribute;
        ++contributions;
      }
      if (stop) break;
    }

    if (contributions > 0) {
      epoch_loss.total /= static_cast<double>(contributions);
      epoch_loss.interaction /= static_cast<double>(contributions);
      epoch_loss.attribute /= static_cast<double>(contributions);
    }

    TrainLogRecord record;
    record.epoch = epoch;
    record.total = epoch_loss.total;
    record.interaction = epoch_loss.interaction;
    record.attribute = epoch_loss.attribute;
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();

    if (!stop && (epoch % config.eval_every == 0 || epoch == config.epochs)) {
      const double val = validation_attribute_mse(params, dataset);
      record.val_mse = val;
      if (val < result.best_val_mse) {
        result.best_val_mse = val;
        result.best_epoch = epoch;
        result.best_params = params;
        result.best_checkpoint = save_best(params);
        evals_since_best = 0;
      } else {
        ++evals_since_best;
        if (evals_since_best >= config.patience) {
          log_info("early stop at epoch " + std::to_string(epoch));
          stop = true;
        }
      }
    }
    result.log.push_back(record);
    result.epochs_run = epoch;
  }

  if (result.best_epoch == 0) {  // no evaluation ever ran or training aborted first
    result.best_val_mse = validation_attribute_mse(params, dataset);
    result.best_epoch = result.epochs_run;
    result.best_params = params;
    result.best_checkpoint = save_best(params);
  }
  result.final_loss = mean_loss_over_windows(windows, params, config.lambda);
  write_log(config.checkpoint_dir, result.log);
  return result;
}

}  // namespace dartnet
