// SPDX-License-Identifier: Apache-2.0
#include "dartnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace dartnet {

namespace {

double similarity(const std::vector<double>& a, const std::vector<double>& b) {
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sq += d * d;
  }
  return 1.0 / (1.0 + sq);  // in (0, 1]
}

}  // namespace

void SynthConfig::validate() const {
  if (num_entities == 0 || num_relations == 0 || num_ticks == 0 || attr_arity == 0 || period == 0) {
    throw std::invalid_argument("synth: counts must be positive");
  }
  if (coupling < 0.0 || coupling > 1.0) throw std::invalid_argument("synth: coupling must be in [0,1]");
  if (edge_density < 0.0 || edge_density > 1.0) {
    throw std::invalid_argument("synth: edge_density must be in [0,1]");
  }
  if (noise_std < 0.0) throw std::invalid_argument("synth: noise_std must be >= 0");
  if (ar_spread < 0.0) throw std::invalid_argument("synth: ar_spread must be >= 0");
}

std::vector<double> SynthConfig::entity_ar_coeffs() const {
  std::vector<double> coeffs(num_entities, ar_coeff);
  if (ar_spread > 0.0) {
    std::mt19937_64 rng(seed ^ 0xa5a5a5a5a5a5a5a5ull);
    std::uniform_real_distribution<double> dist(0.0, ar_spread);
    for (double& c : coeffs) c = ar_coeff - dist(rng);
  }
  return coeffs;
}

std::vector<std::vector<double>> advance_attributes(const std::vector<std::vector<double>>& attrs,
                                                    const std::vector<std::vector<int>>& neighbors,
                                                    const SynthConfig& config, std::mt19937_64& rng,
                                                    double* sq_noise, std::size_t* count) {
  std::normal_distribution<double> noise(0.0, config.noise_std > 0.0 ? config.noise_std : 1.0);
  const std::vector<double> rho = config.entity_ar_coeffs();
  std::vector<std::vector<double>> next(attrs.size());
  for (std::size_t h = 0; h < attrs.size(); ++h) {
    const std::size_t k = attrs[h].size();
    std::vector<double> drift(k);
    for (std::size_t i = 0; i < k; ++i) drift[i] = rho[h] * attrs[h][i];
    if (config.coupling > 0.0 && !neighbors[h].empty()) {
      std::vector<double> mean(k, 0.0);
      for (int t : neighbors[h]) {
        for (std::size_t i = 0; i < k; ++i) mean[i] += attrs[static_cast<std::size_t>(t)][i];
      }
      for (std::size_t i = 0; i < k; ++i) {
        mean[i] /= static_cast<double>(neighbors[h].size());
        drift[i] = (1.0 - config.coupling) * drift[i] + config.coupling * mean[i];
      }
    }
    next[h].resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      const double eps = config.noise_std > 0.0 ? noise(rng) : 0.0;
      next[h][i] = drift[i] + eps;
      if (sq_noise) *sq_noise += eps * eps;
      if (count) ++*count;
    }
  }
  return next;
}

SynthResult generate(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  const std::size_t n = config.num_entities;

  std::vector<std::vector<double>> attrs(n);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (auto& a : attrs) {
    a.resize(config.attr_arity);
    for (double& v : a) v = unit(rng);
  }

  // Fixed per-pair phase for the periodic schedule.
  std::uniform_int_distribution<std::size_t> phase_dist(0, config.period - 1);
  std::vector<std::vector<std::size_t>> phase(n, std::vector<std::size_t>(n, 0));
  for (std::size_t h = 0; h < n; ++h) {
    for (std::size_t t = 0; t < n; ++t) {
      if (h != t) phase[h][t] = phase_dist(rng);
    }
  }

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  SynthResult result;
  double sq_noise = 0.0;
  std::size_t noise_count = 0;

  for (std::size_t tick = 0; tick < config.num_ticks; ++tick) {
    std::vector<std::vector<int>> neighbors(n);
    for (std::size_t h = 0; h < n; ++h) {
      for (std::size_t t = 0; t < n; ++t) {
        if (h == t) continue;
        if ((tick + phase[h][t]) % config.period != 0) continue;
        const double sim = similarity(attrs[h], attrs[t]);
        const double p = std::min(1.0, config.edge_density * (1.0 + sim));
        if (coin(rng) >= p) continue;
        const auto rel = std::min(config.num_relations - 1,
                                  static_cast<std::size_t>(sim * static_cast<double>(config.num_relations)));
        RawEvent e;
        e.head = "e" + std::to_string(h);
        e.relation = "r" + std::to_string(rel);
        e.tail = "e" + std::to_string(t);
        e.attr_head = attrs[h];
        e.attr_tail = attrs[t];
        e.timestamp = static_cast<std::int64_t>(tick);
        result.events.push_back(std::move(e));
        // attribute coupling flows along the edge: h drives t
        neighbors[t].push_back(static_cast<int>(h));
      }
    }
    if (tick + 1 < config.num_ticks) {
      attrs = advance_attributes(attrs, neighbors, config, rng, &sq_noise, &noise_count);
    }
  }
  result.transitions = noise_count;
  result.mean_function_mse = noise_count > 0 ? sq_noise / static_cast<double>(noise_count) : 0.0;
  return result;
}

double oracle_mse(const SynthConfig& config) { return generate(config).mean_function_mse; }

void write_dataset(const SynthConfig& config, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const SynthResult result = generate(config);
  fs::create_directories(out_dir);
  write_events_file((fs::path(out_dir) / "events.tsv").string(), result.events);

  nlohmann::json sidecar;
  sidecar["config"] = {{"num_entities", config.num_entities},
                       {"num_relations", config.num_relations},
                       {"num_ticks", config.num_ticks},
                       {"attr_arity", config.attr_arity},
                       {"coupling", config.coupling},
                       {"edge_density", config.edge_density},
                       {"noise_std", config.noise_std},
                       {"ar_coeff", config.ar_coeff},
                       {"ar_spread", config.ar_spread},
                       {"period", config.period},
                       {"seed", config.seed}};
  sidecar["oracle"] = {{"mean_function_mse", result.mean_function_mse},
                       {"transitions", result.transitions},
                       {"num_events", result.events.size()}};
  std::ofstream out(fs::path(out_dir) / "sidecar.json");
  if (!out) throw DataError("cannot write sidecar.json in " + out_dir);
  out << sidecar.dump(2) << '\n';
}

}  // namespace dartnet
