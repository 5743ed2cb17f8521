// SPDX-License-Identifier: Apache-2.0
//
// dartnet command-line tool: generate | train | eval | forecast | ablate.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime/numeric.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dartnet/dataio.hpp"
#include "dartnet/eval.hpp"
#include "dartnet/inference.hpp"
#include "dartnet/log.hpp"
#include "dartnet/model.hpp"
#include "dartnet/synth.hpp"
#include "dartnet/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw dartnet::DataError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw dartnet::DataError("config file " + path + ": " + e.what());
  }
  return j;
}

// Config-file value applies only when the flag was not passed; flags win.
template <typename T>
void fill_from_config(const json& config, const std::string& key, const CLI::Option* option, T& value) {
  if (option != nullptr && option->count() > 0) return;
  if (config.contains(key)) value = config.at(key).get<T>();
}

std::array<double, 3> parse_fractions(const std::vector<double>& fractions) {
  if (fractions.empty()) return {0.8, 0.1, 0.1};
  if (fractions.size() != 3) throw UsageError("--fractions needs exactly 3 values");
  return {fractions[0], fractions[1], fractions[2]};
}

std::uint64_t file_fnv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dartnet::DataError("cannot open " + path);
  std::uint64_t h = 1469598103934665603ull;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

json report_to_json(const dartnet::EvalReport& report) {
  json j;
  j["model"] = report.model;
  j["dataset"] = report.dataset;
  j["horizon"] = report.horizon;
  j["checkpoint_hash"] = report.checkpoint_hash;
  j["attribute_mse_raw"] = report.attribute_mse_raw;
  j["attribute_mse_normalized"] = report.attribute_mse_normalized;
  j["attribute_pairs"] = report.attribute_pairs;
  if (report.links.queries > 0) {
    j["mrr"] = report.links.mrr;
    json hits = json::object();
    for (const auto& [k, v] : report.links.hits) hits["hits@" + std::to_string(k)] = v;
    j["hits"] = hits;
    j["link_queries"] = report.links.queries;
  }
  json per_entity = json::object();
  for (const auto& [entity, mse] : report.per_entity_mse) per_entity[std::to_string(entity)] = mse;
  j["per_entity_mse"] = per_entity;
  return j;
}

dartnet::DatasetSplit load_for_checkpoint(const std::string& data, const std::array<double, 3>& fractions,
                                          const dartnet::Checkpoint& checkpoint) {
  dartnet::DatasetSplit split = dartnet::load_dataset(data, fractions);
  if (checkpoint.dataset_hash != 0 && checkpoint.dataset_hash != dartnet::dataset_fingerprint(split.meta)) {
    dartnet::log_info("dataset fingerprint differs from the one the checkpoint was trained on");
  }
  if (!checkpoint.stats.empty()) split = dartnet::normalize_with(std::move(split), checkpoint.stats);
  return split;
}

// --- generate ---------------------------------------------------------------

struct GenerateArgs {
  dartnet::SynthConfig config;
  std::string out;
};

int run_generate(const GenerateArgs& args) {
  if (args.out.empty()) throw UsageError("--out is required");
  dartnet::write_dataset(args.config, args.out);
  const dartnet::SynthResult result = dartnet::generate(args.config);
  json summary{{"out", args.out},
               {"events", result.events.size()},
               {"oracle_mse", result.mean_function_mse}};
  std::cout << summary.dump() << '\n';
  return 0;
}

// --- train --------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string out;
  std::vector<double> fractions;
  dartnet::TrainConfig config;
  std::string variant = "full";
  bool no_normalize = false;
};

int run_train(TrainArgs args) {
  if (args.data.empty()) throw UsageError("--data is required");
  if (args.out.empty()) throw UsageError("--out is required");
  args.config.variant = dartnet::variant_from_string(args.variant);
  args.config.checkpoint_dir = args.out;

  dartnet::DatasetSplit split = dartnet::load_dataset(args.data, parse_fractions(args.fractions));
  for (const std::string& warning : split.meta.warnings) dartnet::log_info(warning);
  if (!args.no_normalize) split = dartnet::normalize(std::move(split));

  const dartnet::TrainResult result = dartnet::train(split, args.config);
  dartnet::save_vocabulary(split.meta, args.out);

  json summary{{"best_checkpoint", result.best_checkpoint},
               {"best_val_mse", result.best_val_mse},
               {"best_epoch", result.best_epoch},
               {"epochs_run", result.epochs_run},
               {"initial_loss", result.initial_loss.total},
               {"final_loss", result.final_loss.total},
               {"aborted_non_finite", result.aborted_non_finite}};
  std::cout << summary.dump() << '\n';
  if (result.aborted_non_finite) {
    dartnet::log_error("kind=numeric msg=\"training aborted on non-finite loss; last good checkpoint kept\"");
    return 3;
  }
  return 0;
}

// --- eval ---------------------------------------------------------------

struct EvalArgs {
  std::string data;
  std::string checkpoint;
  std::string out;
  std::string csv;
  std::string baseline = "none";
  std::vector<double> fractions;
  std::size_t horizon = 1;
  dartnet::GruBaselineConfig gru_config;
};

int run_eval(const EvalArgs& args) {
  if (args.data.empty()) throw UsageError("--data is required");
  dartnet::EvalReport report;
  if (args.baseline == "none") {
    if (args.checkpoint.empty()) throw UsageError("--checkpoint is required unless --baseline is given");
    const dartnet::Checkpoint checkpoint = dartnet::load_checkpoint(args.checkpoint);
    const dartnet::DatasetSplit split =
        load_for_checkpoint(args.data, parse_fractions(args.fractions), checkpoint);
    dartnet::EvalOptions options;
    options.horizon = args.horizon;
    report = dartnet::evaluate_model(checkpoint.params, split, options);
    report.checkpoint_hash = file_fnv(args.checkpoint);
  } else {
    dartnet::DatasetSplit split = dartnet::load_dataset(args.data, parse_fractions(args.fractions));
    if (args.baseline == "ha") {
      report = dartnet::evaluate_historic_average(split);
    } else if (args.baseline == "gru") {
      split = dartnet::normalize(std::move(split));
      const dartnet::GruBaseline baseline = dartnet::train_gru_baseline(split, args.gru_config);
      report = dartnet::evaluate_gru_baseline(baseline, split);
    } else {
      throw UsageError("--baseline must be none, ha, or gru");
    }
  }
  report.dataset = args.data;
  const json j = report_to_json(report);
  std::cout << j.dump(2) << '\n';
  if (!args.out.empty()) {
    std::ofstream out(args.out);
    if (!out) throw dartnet::DataError("cannot write " + args.out);
    out << j.dump(2) << '\n';
  }
  if (!args.csv.empty()) {
    std::ofstream csv(args.csv);
    if (!csv) throw dartnet::DataError("cannot write " + args.csv);
    csv << "entity,mse\n";
    for (const auto& [entity, mse] : report.per_entity_mse) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.17g", mse);
      csv << entity << ',' << buf << '\n';
    }
  }
  return 0;
}

// --- forecast -------------------------------------------------------------

struct ForecastArgs {
  std::string data;
  std::string checkpoint;
  std::string out;
  std::vector<double> fractions;
  std::size_t horizon = 1;
  std::size_t top_k = 5;
};

int run_forecast(const ForecastArgs& args) {
  if (args.data.empty() || args.checkpoint.empty() || args.out.empty()) {
    throw UsageError("--data, --checkpoint and --out are required");
  }
  const dartnet::Checkpoint checkpoint = dartnet::load_checkpoint(args.checkpoint);
  const dartnet::DatasetSplit split =
      load_for_checkpoint(args.data, parse_fractions(args.fractions), checkpoint);

  // Roll over everything on disk, then forecast past the end.
  std::vector<dartnet::Snapshot> all = split.train;
  all.insert(all.end(), split.valid.begin(), split.valid.end());
  all.insert(all.end(), split.test.begin(), split.test.end());
  const dartnet::HistoryState state = dartnet::roll_history(checkpoint.params, all);

  dartnet::ForecastConfig config;
  config.horizon = args.horizon;
  config.top_k = args.top_k;
  const dartnet::ForecastResult result = dartnet::forecast(all, state, checkpoint.params, config);

  fs::create_directories(args.out);
  std::vector<dartnet::RawEvent> events;
  json attrs_by_entity = json::object();
  for (const dartnet::ForecastStep& step : result.steps) {
    for (const dartnet::Event& e : step.predicted.events) {
      dartnet::Event raw_units = e;
      raw_units.attr_head = dartnet::denormalize_attr(split.stats, e.attr_head);
      raw_units.attr_tail = dartnet::denormalize_attr(split.stats, e.attr_tail);
      events.push_back(dartnet::decode_event(raw_units, split.meta));
    }
    for (const auto& [entity, attrs] : step.attributes) {
      attrs_by_entity[split.meta.entities.name_of(entity)].push_back(
          dartnet::denormalize_attr(split.stats, attrs));
    }
  }
  dartnet::write_events_file((fs::path(args.out) / "forecast.tsv").string(), events, {"predicted=true"});
  std::ofstream attrs_out(fs::path(args.out) / "attributes.json");
  if (!attrs_out) throw dartnet::DataError("cannot write attributes.json in " + args.out);
  attrs_out << attrs_by_entity.dump(2) << '\n';

  json summary{{"out", args.out}, {"steps", result.steps.size()}, {"events", events.size()}};
  std::cout << summary.dump() << '\n';
  return 0;
}

// --- ablate ---------------------------------------------------------------

struct AblateArgs {
  std::string data;
  std::string out;
  std::vector<double> fractions;
  std::size_t seeds = 3;
  std::size_t jobs = 2;
  dartnet::TrainConfig config;
};

int run_ablate(const AblateArgs& args) {
  if (args.data.empty()) throw UsageError("--data is required");
  dartnet::DatasetSplit split = dartnet::load_dataset(args.data, parse_fractions(args.fractions));
  split = dartnet::normalize(std::move(split));

  const std::vector<dartnet::VariantKind> variants = {
      dartnet::VariantKind::full, dartnet::VariantKind::decoupled,
      dartnet::VariantKind::shared_history, dartnet::VariantKind::time_independent};

  struct Task {
    dartnet::VariantKind variant;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (dartnet::VariantKind variant : variants) {
    for (std::size_t s = 0; s < args.seeds; ++s) tasks.push_back({variant, args.config.seed + s});
  }

  std::vector<double> mse(tasks.size(), 0.0);
  const std::size_t jobs = std::max<std::size_t>(1, args.jobs);
  std::size_t next = 0;
  while (next < tasks.size()) {
    const std::size_t batch = std::min(jobs, tasks.size() - next);
    std::vector<std::future<double>> futures;
    for (std::size_t i = 0; i < batch; ++i) {
      const Task task = tasks[next + i];
      futures.push_back(std::async(std::launch::async, [&split, &args, task]() {
        dartnet::TrainConfig config = args.config;
        config.variant = task.variant;
        config.seed = task.seed;
        config.checkpoint_dir.clear();
        const dartnet::TrainResult result = dartnet::train(split, config);
        return dartnet::evaluate_model(result.best_params, split).attribute_mse_raw;
      }));
    }
    for (std::size_t i = 0; i < batch; ++i) mse[next + i] = futures[i].get();
    next += batch;
  }

  json table = json::array();
  std::printf("%-18s", "variant");
  for (std::size_t s = 0; s < args.seeds; ++s) std::printf("  seed%-10zu", s);
  std::printf("  median\n");
  for (std::size_t v = 0; v < variants.size(); ++v) {
    std::vector<double> row;
    for (std::size_t s = 0; s < args.seeds; ++s) row.push_back(mse[v * args.seeds + s]);
    std::vector<double> sorted = row;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    std::printf("%-18s", dartnet::to_string(variants[v]).c_str());
    for (double value : row) std::printf("  %-14.6g", value);
    std::printf("  %-14.6g\n", median);
    table.push_back(json{{"variant", dartnet::to_string(variants[v])},
                         {"test_attribute_mse", row},
                         {"median", median}});
  }
  if (!args.out.empty()) {
    fs::create_directories(args.out);
    std::ofstream out(fs::path(args.out) / "ablate.json");
    if (!out) throw dartnet::DataError("cannot write ablate.json in " + args.out);
    out << table.dump(2) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint attribute and link prediction on temporally evolving multi-relational graphs"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; command-line flags take precedence")
      ->configurable(false);

  GenerateArgs gen;
  CLI::App* generate = app.add_subcommand("generate", "Write a synthetic dataset");
  generate->add_option("--out", gen.out, "Output directory");
  auto* g_entities = generate->add_option("--entities", gen.config.num_entities);
  auto* g_relations = generate->add_option("--relations", gen.config.num_relations);
  auto* g_ticks = generate->add_option("--ticks", gen.config.num_ticks);
  auto* g_arity = generate->add_option("--arity", gen.config.attr_arity);
  auto* g_gamma = generate->add_option("--gamma", gen.config.coupling, "Attribute-graph coupling in [0,1]");
  auto* g_density = generate->add_option("--density", gen.config.edge_density);
  auto* g_noise = generate->add_option("--noise", gen.config.noise_std);
  auto* g_ar = generate->add_option("--ar-coeff", gen.config.ar_coeff);
  auto* g_spread = generate->add_option("--ar-spread", gen.config.ar_spread,
                                        "Per-entity spread below --ar-coeff");
  auto* g_period = generate->add_option("--period", gen.config.period);
  auto* g_seed = generate->add_option("--seed", gen.config.seed);

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--data", tr.data, "Dataset directory or event file");
  train_cmd->add_option("--out", tr.out, "Checkpoint directory");
  train_cmd->add_option("--fractions", tr.fractions, "Train/valid/test fractions for single-file data")
      ->expected(3);
  auto* t_lambda = train_cmd->add_option("--lambda", tr.config.lambda, "Attribute loss weight");
  auto* t_epochs = train_cmd->add_option("--epochs", tr.config.epochs);
  auto* t_lr = train_cmd->add_option("--lr", tr.config.lr);
  auto* t_seq = train_cmd->add_option("--seq-len", tr.config.trunc_len, "History length per example");
  auto* t_seed = train_cmd->add_option("--seed", tr.config.seed);
  auto* t_variant = train_cmd->add_option("--variant", tr.variant, "full|decoupled|shared_history|time_independent");
  auto* t_hidden = train_cmd->add_option("--hidden-dim", tr.config.hidden_dim);
  auto* t_embed = train_cmd->add_option("--embed-dim", tr.config.embed_dim);
  auto* t_eval_every = train_cmd->add_option("--eval-every", tr.config.eval_every);
  auto* t_batch = train_cmd->add_option("--batch-heads", tr.config.batch_heads);
  auto* t_patience = train_cmd->add_option("--patience", tr.config.patience);
  train_cmd->add_flag("--no-normalize", tr.no_normalize, "Train on raw attribute values");

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint or baseline");
  eval_cmd->add_option("--data", ev.data);
  eval_cmd->add_option("--checkpoint", ev.checkpoint);
  eval_cmd->add_option("--out", ev.out, "Write the JSON report here as well");
  eval_cmd->add_option("--csv", ev.csv, "Write per-entity MSE as CSV");
  eval_cmd->add_option("--fractions", ev.fractions)->expected(3);
  eval_cmd->add_option("--horizon", ev.horizon, "Multi-step forecast evaluation when > 1");
  eval_cmd->add_option("--baseline", ev.baseline, "none|ha|gru");
  eval_cmd->add_option("--baseline-epochs", ev.gru_config.epochs);
  eval_cmd->add_option("--baseline-layers", ev.gru_config.layers);
  eval_cmd->add_option("--baseline-hidden", ev.gru_config.hidden_dim);
  eval_cmd->add_option("--seed", ev.gru_config.seed);

  ForecastArgs fo;
  CLI::App* forecast_cmd = app.add_subcommand("forecast", "Roll the model past the end of the data");
  forecast_cmd->add_option("--data", fo.data);
  forecast_cmd->add_option("--checkpoint", fo.checkpoint);
  forecast_cmd->add_option("--out", fo.out);
  forecast_cmd->add_option("--fractions", fo.fractions)->expected(3);
  forecast_cmd->add_option("--horizon", fo.horizon);
  forecast_cmd->add_option("--top-k", fo.top_k, "Tails kept per (head, relation) query");

  AblateArgs ab;
  CLI::App* ablate_cmd = app.add_subcommand("ablate", "Train and compare all model variants");
  ablate_cmd->add_option("--data", ab.data);
  ablate_cmd->add_option("--out", ab.out);
  ablate_cmd->add_option("--fractions", ab.fractions)->expected(3);
  ablate_cmd->add_option("--seeds", ab.seeds, "Seeds per variant");
  ablate_cmd->add_option("--jobs", ab.jobs, "Parallel training workers");
  auto* a_lambda = ablate_cmd->add_option("--lambda", ab.config.lambda);
  auto* a_epochs = ablate_cmd->add_option("--epochs", ab.config.epochs);
  auto* a_seq = ablate_cmd->add_option("--seq-len", ab.config.trunc_len);
  auto* a_hidden = ablate_cmd->add_option("--hidden-dim", ab.config.hidden_dim);
  auto* a_embed = ablate_cmd->add_option("--embed-dim", ab.config.embed_dim);
  auto* a_eval_every = ablate_cmd->add_option("--eval-every", ab.config.eval_every);
  auto* a_seed = ablate_cmd->add_option("--seed", ab.config.seed, "Base seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForVersion") return code;
    std::cerr << "dartnet: error: kind=usage msg=\"" << e.what() << "\"\n";
    return 1;
  }

  try {
    const json config = load_config_file(config_path);

    if (*generate) {
      fill_from_config(config, "entities", g_entities, gen.config.num_entities);
      fill_from_config(config, "relations", g_relations, gen.config.num_relations);
      fill_from_config(config, "ticks", g_ticks, gen.config.num_ticks);
      fill_from_config(config, "arity", g_arity, gen.config.attr_arity);
      fill_from_config(config, "gamma", g_gamma, gen.config.coupling);
      fill_from_config(config, "density", g_density, gen.config.edge_density);
      fill_from_config(config, "noise", g_noise, gen.config.noise_std);
      fill_from_config(config, "ar_coeff", g_ar, gen.config.ar_coeff);
      fill_from_config(config, "ar_spread", g_spread, gen.config.ar_spread);
      fill_from_config(config, "period", g_period, gen.config.period);
      fill_from_config(config, "seed", g_seed, gen.config.seed);
      return run_generate(gen);
    }
    if (*train_cmd) {
      fill_from_config(config, "lambda", t_lambda, tr.config.lambda);
      fill_from_config(config, "epochs", t_epochs, tr.config.epochs);
      fill_from_config(config, "lr", t_lr, tr.config.lr);
      fill_from_config(config, "seq_len", t_seq, tr.config.trunc_len);
      fill_from_config(config, "seed", t_seed, tr.config.seed);
      fill_from_config(config, "variant", t_variant, tr.variant);
      fill_from_config(config, "hidden_dim", t_hidden, tr.config.hidden_dim);
      fill_from_config(config, "embed_dim", t_embed, tr.config.embed_dim);
      fill_from_config(config, "eval_every", t_eval_every, tr.config.eval_every);
      fill_from_config(config, "batch_heads", t_batch, tr.config.batch_heads);
      fill_from_config(config, "patience", t_patience, tr.config.patience);
      return run_train(tr);
    }
    if (*eval_cmd) return run_eval(ev);
    if (*forecast_cmd) return run_forecast(fo);
    if (*ablate_cmd) {
      fill_from_config(config, "lambda", a_lambda, ab.config.lambda);
      fill_from_config(config, "epochs", a_epochs, ab.config.epochs);
      fill_from_config(config, "seq_len", a_seq, ab.config.trunc_len);
      fill_from_config(config, "hidden_dim", a_hidden, ab.config.hidden_dim);
      fill_from_config(config, "embed_dim", a_embed, ab.config.embed_dim);
      fill_from_config(config, "eval_every", a_eval_every, ab.config.eval_every);
      fill_from_config(config, "seed", a_seed, ab.config.seed);
      return run_ablate(ab);
    }
  } catch (const UsageError& e) {
    std::cerr << "dartnet: error: kind=usage msg=\"" << e.what() << "\"\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "dartnet: error: kind=usage msg=\"" << e.what() << "\"\n";
    return 1;
  } catch (const dartnet::DataError& e) {
    std::cerr << "dartnet: error: kind=data msg=\"" << e.what() << "\"\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "dartnet: error: kind=runtime msg=\"" << e.what() << "\"\n";
    return 3;
  }
  return 0;
}
