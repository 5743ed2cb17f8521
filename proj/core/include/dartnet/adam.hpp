// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "dartnet/tensor.hpp"

namespace dartnet {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Per-parameter moment estimates plus the shared step counter.
class AdamState {
 public:
  AdamState() = default;
  AdamState(const std::vector<const Array*>& params, AdamConfig config);

  const AdamConfig& config() const { return config_; }
  std::int64_t step_count() const { return step_count_; }
  const std::vector<Array>& first_moment() const { return first_moment_; }
  const std::vector<Array>& second_moment() const { return second_moment_; }

 private:
  friend bool adam_step(const std::vector<Array*>&, const std::vector<std::vector<double>>&, AdamState&);
  AdamConfig config_;
  std::vector<Array> first_moment_;
  std::vector<Array> second_moment_;
  std::int64_t step_count_ = 0;
};

/// One bias-corrected Adam update. Returns false and leaves params and
/// moments untouched when any gradient entry is non-finite; the step
/// counter advances only on an applied update.
bool adam_step(const std::vector<Array*>& params, const std::vector<std::vector<double>>& grads,
               AdamState& state);

/// Scales grads in place so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(std::vector<std::vector<double>>& grads, double max_norm);

}  // namespace dartnet
