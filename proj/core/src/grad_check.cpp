// SPDX-License-Identifier: Apache-2.0
#include "dartnet/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace dartnet {

namespace {

double eval_scalar(const TapeFn& fn, const std::vector<Array>& points, bool* ok) {
  Tape tape;
  std::vector<Tensor> leaves;
  leaves.reserve(points.size());
  for (const Array& p : points) leaves.push_back(tape.leaf(p, false));
  const Tensor out = fn(tape, leaves);
  const double v = out.scalar();
  if (!std::isfinite(v)) *ok = false;
  return v;
}

}  // namespace

GradCheckReport grad_check(const TapeFn& fn, const std::vector<Array>& points,
                           double eps, double tol) {
  GradCheckReport report;

  // Reverse-mode pass.
  std::vector<std::vector<double>> analytic(points.size());
  try {
    Tape tape;
    std::vector<Tensor> leaves;
    leaves.reserve(points.size());
    for (const Array& p : points) leaves.push_back(tape.leaf(p, true));
    const Tensor out = fn(tape, leaves);
    if (!std::isfinite(out.scalar())) {
      report.finite = false;
      report.detail = "non-finite forward value at the base point";
      return report;
    }
    tape.backward(out);
    for (std::size_t i = 0; i < points.size(); ++i) analytic[i] = tape.grad(leaves[i]);
  } catch (const std::exception& e) {
    report.finite = false;
    report.detail = std::string("reverse-mode evaluation failed: ") + e.what();
    return report;
  }

  // Central differences, one coordinate at a time.
  std::vector<Array> probe = points;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; j < points[i].size(); ++j) {
      const double saved = probe[i].values[j];
      bool ok = true;
      double plus = 0.0, minus = 0.0;
      try {
        probe[i].values[j] = saved + eps;
        plus = eval_scalar(fn, probe, &ok);
        probe[i].values[j] = saved - eps;
        minus = eval_scalar(fn, probe, &ok);
      } catch (const std::exception& e) {
        probe[i].values[j] = saved;
        report.finite = false;
        report.detail = std::string("finite-difference probe failed: ") + e.what();
        return report;
      }
      probe[i].values[j] = saved;
      if (!ok) {
        report.finite = false;
        report.detail = "non-finite value at a finite-difference probe";
        return report;
      }
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[i][j];
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_input = i;
        report.worst_coord = j;
      }
    }
  }
  report.pass = report.finite && report.max_rel_err <= tol;
  return report;
}

}  // namespace dartnet
