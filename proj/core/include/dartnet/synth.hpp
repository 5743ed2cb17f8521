// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dartnet/dataio.hpp"

namespace dartnet {

/// Controls for the synthetic dynamic-attributed-graph generator.
///
/// Each entity starts with a N(0,1) attribute vector. At every tick, an
/// ordered pair (h,t) is eligible when its periodic schedule fires, and an
/// eligible edge appears with probability rising in attribute similarity.
/// Attributes then advance by
///   a_{e,tau+1} = (1-coupling) * rho_e * a_{e,tau}
///               + coupling * mean(in-neighbor attributes at tau)
///               + N(0, noise_std^2),
/// where an in-neighbor of e is the head of an edge pointing at e, and
/// rho_e is the entity's AR(1) coefficient, drawn once from
/// [ar_coeff - ar_spread, ar_coeff] (every entity shares ar_coeff when
/// ar_spread is 0). Entities without in-edges that tick fall back to the
/// plain AR(1) term. coupling = 0 gives graph-independent series;
/// coupling = 1 ties every series entirely to its neighborhood.
struct SynthConfig {
  std::size_t num_entities = 20;
  std::size_t num_relations = 3;
  std::size_t num_ticks = 200;
  std::size_t attr_arity = 1;
  double coupling = 0.7;     // gamma in [0,1]
  double edge_density = 0.3; // in [0,1]; 1 makes every scheduled edge fire
  double noise_std = 0.05;   // sigma >= 0
  double ar_coeff = 0.9;     // AR(1) coefficient; 1 keeps attributes static
  double ar_spread = 0.0;    // per-entity spread below ar_coeff
  std::size_t period = 4;    // per-pair schedule period, >= 1
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument

  /// The per-entity AR(1) coefficients this config induces.
  std::vector<double> entity_ar_coeffs() const;
};

struct SynthResult {
  std::vector<RawEvent> events;
  /// Realized mean squared deviation of next-tick attributes from the
  /// generator's own mean function, i.e. the average squared injected
  /// noise. This is the floor any one-step predictor can reach.
  double mean_function_mse = 0.0;
  std::size_t transitions = 0;
};

SynthResult generate(const SynthConfig& config);

/// The Bayes-optimal one-step MSE for this config, estimated by running
/// the generator and scoring its own mean function against the realized
/// noise. Exactly 0 when noise_std is 0.
double oracle_mse(const SynthConfig& config);

/// Writes events.tsv plus a sidecar.json with the config and oracle values.
void write_dataset(const SynthConfig& config, const std::string& out_dir);

/// One application of the attribute transition rule, exposed so the rule
/// can be driven with a fixed adjacency. attrs[h] holds entity h's current
/// vector; neighbors[h] lists its out-neighbors this tick. Squared noise is
/// accumulated into sq_noise/count when given.
std::vector<std::vector<double>> advance_attributes(const std::vector<std::vector<double>>& attrs,
                                                    const std::vector<std::vector<int>>& neighbors,
                                                    const SynthConfig& config, std::mt19937_64& rng,
                                                    double* sq_noise = nullptr,
                                                    std::size_t* count = nullptr);

}  // namespace dartnet
