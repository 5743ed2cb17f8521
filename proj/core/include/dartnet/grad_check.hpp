// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dartnet/tape.hpp"

namespace dartnet {

/// A scalar-valued function rebuilt on a fresh tape per evaluation.
/// The leaves are handed over in the same order as the points given
/// to grad_check.
using TapeFn = std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

struct GradCheckReport {
  bool pass = false;
  bool finite = true;  // false when any probe produced a non-finite value
  double max_rel_err = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_coord = 0;
  std::string detail;
};

/// Compares reverse-mode gradients against central finite differences at
/// the given points. Error is |analytic - numeric| relative to the larger
/// magnitude, with an absolute floor of 1 in the denominator. Non-finite
/// values are reported, not thrown.
GradCheckReport grad_check(const TapeFn& fn, const std::vector<Array>& points,
                           double eps = 1e-5, double tol = 1e-4);

}  // namespace dartnet
