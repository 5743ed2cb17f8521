// SPDX-License-Identifier: Apache-2.0
#include "dartnet/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace dartnet {

AdamState::AdamState(const std::vector<const Array*>& params, AdamConfig config)
    : config_(config) {
  first_moment_.reserve(params.size());
  second_moment_.reserve(params.size());
  for (const Array* p : params) {
    first_moment_.push_back(Array::zeros(p->shape));
    second_moment_.push_back(Array::zeros(p->shape));
  }
}

bool adam_step(const std::vector<Array*>& params, const std::vector<std::vector<double>>& grads,
               AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment_.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient/state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->size() != grads[i].size()) {
      throw std::invalid_argument("adam_step: gradient size mismatch at parameter " + std::to_string(i));
    }
    for (double g : grads[i]) {
      if (!std::isfinite(g)) return false;
    }
  }

  const AdamConfig& c = state.config_;
  state.step_count_ += 1;
  const double t = static_cast<double>(state.step_count_);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment_[i].values;
    auto& v = state.second_moment_[i].values;
    auto& p = params[i]->values;
    const auto& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bias1;
      const double v_hat = v[j] / bias2;
      p[j] -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
  return true;
}

double clip_global_norm(std::vector<std::vector<double>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double v : g) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (auto& g : grads) {
      for (double& v : g) v *= factor;
    }
  }
  return norm;
}

}  // namespace dartnet
