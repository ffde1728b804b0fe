// SPDX-License-Identifier: Apache-2.0
#include "antlab/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace antlab {

namespace {
double eval(const ScalarFn& f, const Tensor& x) {
  Tape tape(false);
  const double v = f(tape, tape.constant(x.detached())).item();
  if (!std::isfinite(v)) throw std::domain_error("grad_check: function value is not finite");
  return v;
}
}  // namespace

GradCheckReport grad_check(const ScalarFn& f, const Tensor& x, double h, double tol) {
  if (!(h > 0)) throw std::invalid_argument("grad_check: step h must be positive");
  Tensor leaf = x.detached();
  leaf.set_requires_grad(true);
  {
    Tape tape;
    Var loss = f(tape, tape.leaf(leaf));
    if (!std::isfinite(loss.item())) throw std::domain_error("grad_check: function value is not finite");
    backward(tape, loss);
  }
  GradCheckReport report;
  Tensor probe = x.detached();
  for (std::size_t i = 0; i < probe.numel(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double fp = eval(f, probe);
    probe[i] = orig - h;
    const double fm = eval(f, probe);
    probe[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double analytic = leaf.grad()[i];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    const double rel = std::abs(analytic - numeric) / denom;
    if (rel > report.max_rel_error || i == 0) {
      report.max_rel_error = rel;
      report.worst_index = i;
      report.analytic_at_worst = analytic;
      report.numeric_at_worst = numeric;
    }
  }
  report.passed = report.max_rel_error <= tol;
  return report;
}

}  // namespace antlab
